"""GF(2) linear algebra on int bitsets.

A vector over GF(2)^n is a Python int whose bit ``i`` holds coordinate ``i``.
A matrix is a list of such ints, one per row.
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Sequence


def dot(a: int, b: int) -> int:
    """Inner product over GF(2)."""
    return (a & b).bit_count() & 1


def rref(rows: Iterable[int]) -> List[int]:
    """Reduced row echelon form, zero rows dropped.

    Pivots are the highest set bit of each row; the result is sorted by
    descending pivot, which makes it a canonical basis of the row span.
    """
    basis: List[int] = []
    for r in rows:
        for b in basis:
            if r & (1 << (b.bit_length() - 1)):
                r ^= b
        if r == 0:
            continue
        piv = 1 << (r.bit_length() - 1)
        basis = [b ^ r if b & piv else b for b in basis]
        basis.append(r)
    basis.sort(reverse=True)
    return basis


def rank(rows: Iterable[int]) -> int:
    return len(rref(rows))


def in_span(v: int, basis: Sequence[int]) -> bool:
    """Membership test; ``basis`` must already be in rref form."""
    for b in basis:
        if v & (1 << (b.bit_length() - 1)):
            v ^= b
    return v == 0


def nullspace(rows: Sequence[int], ncols: int) -> List[int]:
    """Basis (rref) of {v in GF(2)^ncols : dot(r, v) = 0 for every row r}."""
    red = rref(rows)
    pivots = [b.bit_length() - 1 for b in red]
    pivset = set(pivots)
    out = []
    for free in range(ncols):
        if free in pivset:
            continue
        v = 1 << free
        for b, p in zip(red, pivots):
            if b & (1 << free):
                v |= 1 << p
        out.append(v)
    return rref(out)


def span_elements(basis: Sequence[int]) -> List[int]:
    """All 2^dim elements of the span, in Gray-code order starting at 0."""
    elems = [0]
    for b in basis:
        elems += [e ^ b for e in elems]
    return elems


def apply(matrix_rows: Sequence[int], v: int) -> int:
    """Matrix-vector product: bit ``i`` of the result is dot(row_i, v)."""
    out = 0
    for i, row in enumerate(matrix_rows):
        if dot(row, v):
            out |= 1 << i
    return out


def solve(equations: Sequence[int], rhs: Sequence[int], ncols: int) -> Optional[int]:
    """One solution x of dot(equations[i], x) = rhs[i], or None if inconsistent."""
    if any(e >> ncols for e in equations):
        raise ValueError("equation wider than ncols")
    # augmented column sits at bit 0 so it is never chosen as a pivot
    # while any coefficient bit remains
    aug = [(e << 1) | (b & 1) for e, b in zip(equations, rhs)]
    red = rref(aug)
    x = 0
    for row in red:
        p = row.bit_length() - 1
        if p == 0:
            return None
        if row & 1:
            x |= 1 << (p - 1)
    return x


def from_array(matrix) -> List[int]:
    """Rows of a 0/1 array-like as int bitsets."""
    out = []
    for row in matrix:
        v = 0
        for j, bit in enumerate(row):
            if int(bit) & 1:
                v |= 1 << j
        out.append(v)
    return out


def to_bits(v: int, n: int) -> List[int]:
    return [(v >> i) & 1 for i in range(n)]
