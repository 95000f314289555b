"""Rational convolutional encoders over GF(2) and their trellis sections.

Polynomials in D are ints with bit ``i`` holding the coefficient of D^i.
Octal literals are read most-significant digit first; after dropping
leading zero bits the leftmost binary digit is the D^0 coefficient, so
"7" = 1 + D + D^2, "5" = 1 + D^2 and "13" = 1 + D^2 + D^3.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from . import gf2

MAX_DEGREE = 15


class GeneratorError(ValueError):
    """Malformed generator description; ``pos`` is the 0-based text offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


# -- polynomial helpers -----------------------------------------------------

def deg(p: int) -> int:
    return p.bit_length() - 1


def pmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def pdivmod(a: int, b: int) -> Tuple[int, int]:
    if b == 0:
        raise ZeroDivisionError("polynomial division by zero")
    q = 0
    db = deg(b)
    while a and deg(a) >= db:
        s = deg(a) - db
        q ^= 1 << s
        a ^= b << s
    return q, a


def pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, pdivmod(a, b)[1]
    return a


def plcm(a: int, b: int) -> int:
    return pdivmod(pmul(a, b), pgcd(a, b))[0]


def power_series(num: int, den: int, n: int) -> List[int]:
    """First ``n`` coefficients of num/den expanded in nonnegative powers of D."""
    if not den & 1:
        raise ValueError("denominator must have constant term 1")
    out = []
    rem = num
    for t in range(n):
        c = (rem >> t) & 1
        out.append(c)
        if c:
            rem ^= den << t
    return out


def octal_to_poly(text: str) -> int:
    value = int(text, 8)
    if value == 0:
        return 0
    bits = bin(value)[2:]
    return sum(1 << i for i, ch in enumerate(bits) if ch == "1")


# -- generator description --------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    """k x n matrix of rational entries num/den over GF(2)[D]."""

    k: int
    n: int
    entries: Tuple[Tuple[Tuple[str, str], ...], ...]
    num: Tuple[Tuple[int, ...], ...]
    den: Tuple[Tuple[int, ...], ...]
    # (output column, input row) pairs whose column is a plain copy of an input
    systematic: Tuple[Tuple[int, int], ...]
    text: str = ""

    @property
    def memory(self) -> int:
        return max(
            max(deg(self.num[i][j]), deg(self.den[i][j]))
            for i in range(self.k)
            for j in range(self.n)
        )

    @property
    def parity_columns(self) -> List[int]:
        sys_cols = {j for j, _ in self.systematic}
        return [j for j in range(self.n) if j not in sys_cols]


def _parse_entry(tok: str, pos: int) -> Tuple[str, str, int, int]:
    parts = tok.split("/")
    if len(parts) > 2:
        raise GeneratorError(f"too many '/' in entry {tok!r}", pos)
    num_s = parts[0]
    den_s = parts[1] if len(parts) == 2 else "1"
    offset = pos
    polys = []
    for s in (num_s, den_s):
        if not s:
            raise GeneratorError(f"empty octal literal in {tok!r}", offset)
        for i, ch in enumerate(s):
            if ch not in "01234567":
                raise GeneratorError(f"malformed octal digit {ch!r}", offset + i)
        p = octal_to_poly(s)
        if deg(p) > MAX_DEGREE:
            raise GeneratorError(
                f"degree {deg(p)} of {s!r} exceeds cap {MAX_DEGREE}", offset
            )
        polys.append(p)
        offset += len(s) + 1
    num, den = polys
    if not den & 1:
        raise GeneratorError(f"denominator {den_s!r} has zero constant term", pos + len(num_s) + 1)
    return num_s, den_s, num, den


def _tokenize_row(row: str, start: int) -> List[Tuple[str, int]]:
    return [(m.group(), start + m.start()) for m in re.finditer(r"\S+", row)]


def parse_generator(text: str) -> GeneratorSpec:
    """Parse "a,b/c" or whitespace/semicolon generator matrices in octal."""
    if ";" not in text and "," in text:
        rows = [[]]
        pos = 0
        for piece in text.split(","):
            stripped = piece.strip()
            lead = len(piece) - len(piece.lstrip())
            if not stripped:
                raise GeneratorError("empty entry", pos)
            rows[0].append((stripped, pos + lead))
            pos += len(piece) + 1
    else:
        rows = []
        pos = 0
        for row in text.split(";"):
            toks = _tokenize_row(row, pos)
            if not toks:
                raise GeneratorError("empty row", pos)
            rows.append(toks)
            pos += len(row) + 1
    n = len(rows[0])
    for r in rows:
        if len(r) != n:
            raise GeneratorError(f"row has {len(r)} entries, expected {n}", r[0][1])
    entries, nums, dens = [], [], []
    for r in rows:
        e_row, n_row, d_row = [], [], []
        for tok, p in r:
            num_s, den_s, num, den = _parse_entry(tok, p)
            e_row.append((num_s, den_s))
            n_row.append(num)
            d_row.append(den)
        entries.append(tuple(e_row))
        nums.append(tuple(n_row))
        dens.append(tuple(d_row))
    k = len(rows)
    systematic = []
    used_inputs = set()
    for j in range(n):
        col = [(nums[i][j], dens[i][j]) for i in range(k)]
        ones = [i for i, (a, b) in enumerate(col) if a == b]
        zeros = [i for i, (a, _) in enumerate(col) if a == 0]
        if len(ones) == 1 and len(zeros) == k - 1 and ones[0] not in used_inputs:
            systematic.append((j, ones[0]))
            used_inputs.add(ones[0])
    spec = GeneratorSpec(
        k=k,
        n=n,
        entries=tuple(entries),
        num=tuple(nums),
        den=tuple(dens),
        systematic=tuple(systematic),
        text=text,
    )
    if spec.memory < 1:
        raise GeneratorError("encoder memory must be at least 1", 0)
    if not spec.parity_columns:
        raise GeneratorError("encoder has no parity output", 0)
    return spec


# -- trellis ----------------------------------------------------------------

@dataclass(frozen=True)
class Stream:
    """One symbol stream of a trellis section.

    ``functional`` is a GF(2) row vector over (state, input) packed as an int:
    bits 0..m-1 address the state, bits m..m+k-1 the inputs.
    """

    role: str  # "input" or "parity"
    index: int  # input row for input streams, output column for parity streams
    functional: int
    edge: int


@dataclass(frozen=True, eq=False)
class Trellis:
    """Linear state machine next = A s + B u, parity = C s + D u over GF(2)."""

    memory: int
    k: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    streams: Tuple[Stream, ...]
    spec: GeneratorSpec = field(repr=False, compare=False)

    @property
    def num_states(self) -> int:
        return 1 << self.memory

    @property
    def num_streams(self) -> int:
        return len(self.streams)

    @property
    def input_streams(self) -> List[int]:
        return [i for i, s in enumerate(self.streams) if s.role == "input"]

    @property
    def parity_streams(self) -> List[int]:
        return [i for i, s in enumerate(self.streams) if s.role == "parity"]

    @cached_property
    def next_rows(self) -> List[int]:
        """Rows of [A B] as int bitsets over (state, input)."""
        return gf2.from_array(np.hstack([self.A, self.B]))

    def pack(self, state: int, u: int) -> int:
        return state | (u << self.memory)

    def next_state(self, state: int, u: int) -> int:
        return gf2.apply(self.next_rows, self.pack(state, u))

    def symbols(self, state: int, u: int) -> List[int]:
        v = self.pack(state, u)
        return [gf2.dot(s.functional, v) for s in self.streams]

    def branch(self, state: int, u: int) -> Tuple[int, List[int]]:
        return self.next_state(state, u), self.symbols(state, u)

    def tables(self) -> Tuple[np.ndarray, np.ndarray]:
        """next_state[s, u] and symbol[s, u, stream] lookup arrays."""
        ns = np.zeros((self.num_states, 1 << self.k), dtype=np.int64)
        sym = np.zeros((self.num_states, 1 << self.k, self.num_streams), dtype=np.uint8)
        for s in range(self.num_states):
            for u in range(1 << self.k):
                ns[s, u] = self.next_state(s, u)
                sym[s, u] = self.symbols(s, u)
        return ns, sym


def _observer_block(nums: Sequence[int], den: int):
    """Observer canonical form of p = sum_i nums[i] u_i / den."""
    k = len(nums)
    mj = max([deg(den)] + [deg(x) for x in nums])
    d = [(den >> l) & 1 for l in range(mj + 1)]
    n = [[(x >> l) & 1 for l in range(mj + 1)] for x in nums]
    A = np.zeros((mj, mj), dtype=np.uint8)
    B = np.zeros((mj, k), dtype=np.uint8)
    for l in range(mj):
        if l + 1 < mj:
            A[l, l + 1] = 1
        A[l, 0] ^= d[l + 1]
        for i in range(k):
            B[l, i] = n[i][l + 1] ^ (d[l + 1] & n[i][0])
    C = np.zeros(mj, dtype=np.uint8)
    if mj:
        C[0] = 1
    D = np.array([n[i][0] for i in range(k)], dtype=np.uint8)
    return A, B, C, D


def build_trellis(spec: GeneratorSpec) -> Trellis:
    """Realize ``spec`` with one observer-form register block per parity column."""
    blocks = []
    for j in spec.parity_columns:
        den = 1
        for i in range(spec.k):
            den = plcm(den, spec.den[i][j])
        nums = [pmul(spec.num[i][j], pdivmod(den, spec.den[i][j])[0]) for i in range(spec.k)]
        blocks.append(_observer_block(nums, den))
    m = sum(b[0].shape[0] for b in blocks)
    k = spec.k
    A = np.zeros((m, m), dtype=np.uint8)
    B = np.zeros((m, k), dtype=np.uint8)
    C = np.zeros((len(blocks), m), dtype=np.uint8)
    D = np.zeros((len(blocks), k), dtype=np.uint8)
    off = 0
    for r, (a, b, c, d) in enumerate(blocks):
        mj = a.shape[0]
        A[off:off + mj, off:off + mj] = a
        B[off:off + mj] = b
        C[r, off:off + mj] = c
        D[r] = d
        off += mj

    streams = []
    for i in range(k):
        streams.append(Stream("input", i, 1 << (m + i), len(streams)))
    for r, j in enumerate(spec.parity_columns):
        row = gf2.from_array([np.concatenate([C[r], D[r]])])[0]
        streams.append(Stream("parity", j, row, len(streams)))
    trellis = Trellis(m, k, A, B, C, D, tuple(streams), spec)
    _check_impulse_response(trellis, 2 * m + 8)
    return trellis


def impulse_response(trellis: Trellis, input_index: int, sections: int) -> np.ndarray:
    """Symbols per stream for a unit impulse on one input, from the zero state."""
    out = np.zeros((trellis.num_streams, sections), dtype=np.uint8)
    state = 0
    for t in range(sections):
        u = (1 << input_index) if t == 0 else 0
        state, sym = trellis.branch(state, u)
        out[:, t] = sym
    return out


def _check_impulse_response(trellis: Trellis, sections: int) -> None:
    spec = trellis.spec
    for i in range(spec.k):
        resp = impulse_response(trellis, i, sections)
        for s_idx, s in enumerate(trellis.streams):
            if s.role == "input":
                want = [1 if (t == 0 and s.index == i) else 0 for t in range(sections)]
            else:
                want = power_series(spec.num[i][s.index], spec.den[i][s.index], sections)
            if list(resp[s_idx]) != want:
                raise AssertionError(
                    f"realization mismatch for input {i}, stream {s_idx}"
                )


def termination_inputs(trellis: Trellis, state: int) -> List[int]:
    """Inputs for ``memory`` sections that steer ``state`` back to zero."""
    m, k = trellis.memory, trellis.k
    rows = gf2.from_array(trellis.A)
    bcols = [gf2.from_array(trellis.B[:, [i]].T)[0] for i in range(k)]

    def a_apply(v: int, times: int) -> int:
        for _ in range(times):
            v = gf2.apply(rows, v)
        return v

    target = a_apply(state, m)
    # column for unknown input bit (l, i): A^(m-1-l) B e_i
    cols = []
    for l in range(m):
        for i in range(k):
            cols.append(a_apply(bcols[i], m - 1 - l))
    nvars = len(cols)
    equations = []
    rhs = []
    for r in range(m):
        eq = 0
        for c_idx, c in enumerate(cols):
            if (c >> r) & 1:
                eq |= 1 << c_idx
        equations.append(eq)
        rhs.append((target >> r) & 1)
    x = gf2.solve(equations, rhs, nvars)
    assert x is not None, "termination infeasible: (A, B) not controllable"
    return [(x >> (l * k)) & ((1 << k) - 1) for l in range(m)]


def encode(trellis: Trellis, inputs: Sequence[Sequence[int]]) -> np.ndarray:
    """Encode k equal-length bit sequences and terminate in the zero state.

    Returns an array of shape (num_streams, N + memory).
    """
    inputs = np.asarray(inputs, dtype=np.uint8)
    if inputs.ndim != 2 or inputs.shape[0] != trellis.k:
        raise ValueError(f"expected {trellis.k} input sequences of equal length")
    n_sec = inputs.shape[1]
    out = np.zeros((trellis.num_streams, n_sec + trellis.memory), dtype=np.uint8)
    state = 0
    for t in range(n_sec):
        u = int(sum(int(inputs[i, t]) << i for i in range(trellis.k)))
        state, sym = trellis.branch(state, u)
        out[:, t] = sym
    for l, u in enumerate(termination_inputs(trellis, state)):
        state, sym = trellis.branch(state, u)
        out[:, n_sec + l] = sym
    assert state == 0
    return out


def load(text: str) -> Trellis:
    return build_trellis(parse_generator(text))
