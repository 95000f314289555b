import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from turbo_de import gf2

rows_st = st.lists(st.integers(0, 2**6 - 1), max_size=8)


def _span_brute(rows):
    out = {0}
    for r in rows:
        out |= {x ^ r for x in out}
    return out


def test_dot():
    assert gf2.dot(0b1011, 0b0011) == 0
    assert gf2.dot(0b1011, 0b0001) == 1


@given(rows_st)
def test_rref_spans_same_space(rows):
    red = gf2.rref(rows)
    assert set(gf2.span_elements(red)) == _span_brute(rows)
    assert len(red) == gf2.rank(rows)


@given(rows_st)
def test_rref_is_canonical(rows):
    red = gf2.rref(rows)
    # any generating set of the same span gives the same basis
    assert gf2.rref(sorted(_span_brute(rows))) == red
    pivots = [1 << (b.bit_length() - 1) for b in red]
    for b, p in zip(red, pivots):
        assert sum(1 for c in red if c & p) == 1
    assert red == sorted(red, reverse=True)


@given(rows_st, st.integers(0, 2**6 - 1))
def test_in_span(rows, v):
    assert gf2.in_span(v, gf2.rref(rows)) == (v in _span_brute(rows))


@given(rows_st)
def test_nullspace(rows):
    ns = gf2.nullspace(rows, 6)
    assert len(ns) == 6 - gf2.rank(rows)
    want = {v for v in range(64) if all(gf2.dot(r, v) == 0 for r in rows)}
    assert set(gf2.span_elements(ns)) == want


@settings(max_examples=200)
@given(st.lists(st.integers(0, 2**5 - 1), max_size=7), st.integers(0, 2**7 - 1))
def test_solve_matches_brute_force(eqs, rhs_bits):
    rhs = [(rhs_bits >> i) & 1 for i in range(len(eqs))]
    x = gf2.solve(eqs, rhs, 5)
    feasible = [v for v in range(32) if all(gf2.dot(e, v) == b for e, b in zip(eqs, rhs))]
    if x is None:
        assert feasible == []
    else:
        assert x in feasible


def test_solve_rejects_wide_equation():
    import pytest

    with pytest.raises(ValueError):
        gf2.solve([0b100], [1], 2)


def test_apply_and_array_round_trip():
    M = np.array([[1, 0, 1], [0, 1, 1]])
    rows = gf2.from_array(M)
    for v in range(8):
        bits = np.array(gf2.to_bits(v, 3))
        want = (M @ bits) % 2
        assert gf2.to_bits(gf2.apply(rows, v), 2) == list(want)


def test_span_elements_count():
    basis = gf2.rref([0b001, 0b010, 0b100])
    assert sorted(gf2.span_elements(basis)) == list(range(8))
    assert len(set(itertools.chain(gf2.span_elements([])))) == 1
