import itertools

import numpy as np
import pytest

from turbo_de import gf2
from turbo_de.trellis import (
    GeneratorError, build_trellis, encode, impulse_response, load, octal_to_poly,
    parse_generator, power_series, termination_inputs,
)

RATE_HALF = "1,5/7"
RATE_TWO_THIRDS = "1 0 1/7; 0 1 5/7"


def test_octal_convention():
    assert octal_to_poly("7") == 0b111
    assert octal_to_poly("5") == 0b101  # 1 + D^2
    assert octal_to_poly("13") == 0b1101  # 1 + D^2 + D^3
    assert octal_to_poly("1") == 1


def test_parse_rate_half():
    spec = parse_generator(RATE_HALF)
    assert (spec.k, spec.n, spec.memory) == (1, 2, 2)
    assert spec.systematic == ((0, 0),)
    assert spec.parity_columns == [1]


def test_parse_rate_two_thirds():
    spec = parse_generator(RATE_TWO_THIRDS)
    assert (spec.k, spec.n, spec.memory) == (2, 3, 2)
    assert set(spec.systematic) == {(0, 0), (1, 1)}
    assert spec.parity_columns == [2]


def test_comma_and_whitespace_forms_agree():
    a, b = parse_generator("1,5/7"), parse_generator("1 5/7")
    assert (a.num, a.den) == (b.num, b.den)


@pytest.mark.parametrize("text, pos", [
    ("1,5/8", 4),       # bad octal digit
    ("1,5/0", 4),       # denominator without constant term
    ("1,5/", 4),        # empty literal
    ("1", 0),           # memory 0
    ("1,5/7/3", 2),     # two slashes
])
def test_parse_errors_report_position(text, pos):
    with pytest.raises(GeneratorError) as err:
        parse_generator(text)
    assert err.value.pos == pos


def test_degree_cap():
    with pytest.raises(GeneratorError):
        parse_generator("1,5/" + oct(1 << 16 | 1)[2:])


def test_rate_half_trellis():
    t = load(RATE_HALF)
    assert t.num_states == 4
    assert [s.role for s in t.streams] == ["input", "parity"]
    assert t.next_state(0, 0) == 0 and t.symbols(0, 0) == [0, 0]


def test_rate_two_thirds_trellis():
    t = load(RATE_TWO_THIRDS)
    assert t.num_states == 4
    assert [s.role for s in t.streams] == ["input", "input", "parity"]
    assert t.next_state(0, 0) == 0 and t.symbols(0, 0) == [0, 0, 0]


def test_impulse_response_of_five_over_seven():
    # long division of 1 + D^2 by 1 + D + D^2: period 3 after the first term
    resp = impulse_response(load(RATE_HALF), 0, 10)
    assert list(resp[0]) == [1] + [0] * 9
    assert list(resp[1]) == [1, 1, 1, 0, 1, 1, 0, 1, 1, 0]
    assert list(resp[1]) == power_series(0b101, 0b111, 10)


@pytest.mark.parametrize("text", [RATE_HALF, RATE_TWO_THIRDS, "1,17/15", "1,15/13"])
def test_impulse_responses_match_long_division(text):
    t = load(text)
    spec = t.spec
    n = 2 * t.memory + 8
    for i in range(spec.k):
        resp = impulse_response(t, i, n)
        for s_idx, s in enumerate(t.streams):
            if s.role == "parity":
                assert list(resp[s_idx]) == power_series(spec.num[i][s.index],
                                                         spec.den[i][s.index], n)


@pytest.mark.parametrize("text", [RATE_HALF, RATE_TWO_THIRDS])
def test_branch_linearity(text):
    t = load(text)
    rng = np.random.default_rng(3)
    for _ in range(1000):
        s1, s2 = rng.integers(t.num_states, size=2)
        u1, u2 = rng.integers(1 << t.k, size=2)
        n1, y1 = t.branch(int(s1), int(u1))
        n2, y2 = t.branch(int(s2), int(u2))
        n3, y3 = t.branch(int(s1 ^ s2), int(u1 ^ u2))
        assert n3 == n1 ^ n2
        assert y3 == [a ^ b for a, b in zip(y1, y2)]


@pytest.mark.parametrize("text", [RATE_HALF, RATE_TWO_THIRDS])
def test_every_state_has_all_branches(text):
    t = load(text)
    ns, sym = t.tables()
    assert ns.shape == (t.num_states, 1 << t.k)
    # distinct inputs give distinct input symbols, so branches never collapse
    for s in range(t.num_states):
        assert len({tuple(sym[s, u, :t.k]) for u in range(1 << t.k)}) == 1 << t.k


@pytest.mark.parametrize("text", [RATE_HALF, RATE_TWO_THIRDS])
def test_termination_reaches_zero(text):
    t = load(text)
    for state in range(t.num_states):
        s = state
        for u in termination_inputs(t, state):
            s = t.next_state(s, u)
        assert s == 0


def test_encode_zero_and_impulse():
    t = load(RATE_HALF)
    assert not encode(t, [[0] * 8]).any()
    out = encode(t, [[1] + [0] * 9])
    assert out.shape == (2, 12)
    assert list(out[1, :10]) == power_series(0b101, 0b111, 10)


def test_encode_rejects_ragged_input():
    with pytest.raises(ValueError):
        encode(load(RATE_TWO_THIRDS), [[0, 1, 1]])


@pytest.mark.parametrize("text, N", [(RATE_HALF, 12), (RATE_TWO_THIRDS, 6)])
def test_exhaustive_injectivity(text, N):
    t = load(text)
    seen = set()
    for bits in itertools.product([0, 1], repeat=t.k * N):
        inputs = np.array(bits, dtype=np.uint8).reshape(t.k, N)
        seen.add(encode(t, inputs).tobytes())
    assert len(seen) == 2 ** (t.k * N)


def test_zero_erasure_decoding_recovers_inputs():
    # with every symbol observed the systematic streams are the inputs
    t = load(RATE_TWO_THIRDS)
    rng = np.random.default_rng(0)
    inputs = rng.integers(0, 2, size=(2, 30))
    out = encode(t, inputs)
    assert np.array_equal(out[:2, :30], inputs)


def test_state_space_form_of_rate_half():
    t = load(RATE_HALF)
    assert np.array_equal(t.A, [[1, 1], [1, 0]])
    assert np.array_equal(t.B, [[1], [0]])
    assert gf2.to_bits(t.streams[1].functional, 3) == [1, 0, 1]
