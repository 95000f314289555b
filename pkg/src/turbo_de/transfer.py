"""Exact BCJR extrinsic erasure probabilities on the BEC.

On the erasure channel a linear code can be analysed conditioned on the
all-zero codeword. The set of trellis states consistent with the
observations seen so far is then a linear subspace of GF(2)^m, and the
sequence of these subspaces is a finite Markov chain driven by the i.i.d.
per-stream erasures. The extrinsic erasure probability of a stream in the
interior of an infinitely long trellis follows from the limiting forward and
backward distributions of that chain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import gf2
from .trellis import Trellis

log = logging.getLogger(__name__)

MAX_MEMORY = 4
CACHE_QUANTUM = 1e-12

Mask = Union[int, Sequence[bool]]


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Subspace:
    """Subspace of GF(2)^m stored by its canonical rref basis."""

    basis: Tuple[int, ...]
    m: int

    @classmethod
    def span(cls, vectors: Iterable[int], m: int) -> "Subspace":
        return cls(tuple(gf2.rref(vectors)), m)

    @classmethod
    def zero(cls, m: int) -> "Subspace":
        return cls((), m)

    @classmethod
    def full(cls, m: int) -> "Subspace":
        return cls.span([1 << i for i in range(m)], m)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def elements(self) -> List[int]:
        return sorted(gf2.span_elements(self.basis))

    def contains(self, v: int) -> bool:
        return gf2.in_span(v, self.basis)

    def annihilator(self) -> List[int]:
        return gf2.nullspace(self.basis, self.m)


def enumerate_subspaces(m: int) -> List[Subspace]:
    """All subspaces of GF(2)^m; {0} first, the full space last."""
    if not 0 <= m <= MAX_MEMORY:
        raise ValueError(f"memory {m} outside supported range 0..{MAX_MEMORY}")
    seen = {(): Subspace.zero(m)}
    frontier = [Subspace.zero(m)]
    while frontier:
        nxt = []
        for sub in frontier:
            for v in range(1, 1 << m):
                if sub.contains(v):
                    continue
                bigger = Subspace.span(sub.basis + (v,), m)
                if bigger.basis not in seen:
                    seen[bigger.basis] = bigger
                    nxt.append(bigger)
        frontier = nxt
    return sorted(seen.values(), key=lambda s: (s.dim, s.basis))


def _as_mask(erased: Mask) -> int:
    if isinstance(erased, (int, np.integer)):
        return int(erased)
    return sum(1 << i for i, e in enumerate(erased) if e)


def _observed_rows(trellis: Trellis, mask: int) -> List[int]:
    return [s.functional for i, s in enumerate(trellis.streams) if not (mask >> i) & 1]


def _backward_rows(trellis: Trellis, target: Subspace) -> List[int]:
    # rows h.[A B] for h spanning the annihilator of ``target``
    rows = []
    for h in target.annihilator():
        row = 0
        for r, nr in enumerate(trellis.next_rows):
            if (h >> r) & 1:
                row ^= nr
        rows.append(row)
    return rows


def _state_rows(trellis: Trellis, sub: Subspace) -> List[int]:
    # constraints forcing the state part of (state, input) into ``sub``
    return list(sub.annihilator())


def forward_step(F: Subspace, trellis: Trellis, erased: Mask) -> Subspace:
    """States reachable in one section from F through branches whose
    observed (non-erased) symbols are all zero."""
    m = trellis.memory
    w = gf2.nullspace(_state_rows(trellis, F) + _observed_rows(trellis, _as_mask(erased)),
                      m + trellis.k)
    return Subspace.span((gf2.apply(trellis.next_rows, v) for v in w), m)


def backward_step(B: Subspace, trellis: Trellis, erased: Mask) -> Subspace:
    """States from which some branch with zero observed symbols enters B."""
    m = trellis.memory
    w = gf2.nullspace(_backward_rows(trellis, B) + _observed_rows(trellis, _as_mask(erased)),
                      m + trellis.k)
    state_mask = (1 << m) - 1
    return Subspace.span((v & state_mask for v in w), m)


def consistent_branches(F: Subspace, B: Subspace, trellis: Trellis, erased: Mask) -> List[int]:
    """Basis of {(s, u): s in F, A s + B u in B, observed symbols vanish}."""
    rows = _state_rows(trellis, F) + _backward_rows(trellis, B)
    rows += _observed_rows(trellis, _as_mask(erased))
    return gf2.nullspace(rows, trellis.memory + trellis.k)


@lru_cache(maxsize=None)
def _mask_bits(n_streams: int) -> np.ndarray:
    masks = np.arange(1 << n_streams)
    return ((masks[:, None] >> np.arange(n_streams)[None, :]) & 1).astype(bool)


def mask_probabilities(probs: np.ndarray) -> np.ndarray:
    """P(mask) for every erasure mask; bit i of the mask = stream i erased."""
    probs = np.asarray(probs, dtype=float)
    bits = _mask_bits(probs.shape[-1])
    p = probs[..., None, :]
    return np.where(bits, p, 1.0 - p).prod(axis=-1)


class SubspaceChain:
    """Markov chain of knowledge subspaces in one direction."""

    def __init__(self, trellis: Trellis, direction: str = "forward"):
        if direction not in ("forward", "backward"):
            raise ValueError(direction)
        self.trellis = trellis
        self.direction = direction
        self.subspaces = enumerate_subspaces(trellis.memory)
        self.index = {s.basis: i for i, s in enumerate(self.subspaces)}
        step = forward_step if direction == "forward" else backward_step
        n_masks = 1 << trellis.num_streams
        self.table = np.array(
            [[self.index[step(s, trellis, mask).basis] for mask in range(n_masks)]
             for s in self.subspaces],
            dtype=np.int64,
        )
        self._structure: Dict[bytes, tuple] = {}
        one_hot = np.zeros((n_masks, self.size, self.size))
        for i in range(self.size):
            one_hot[np.arange(n_masks), i, self.table[i]] = 1.0
        self._one_hot = one_hot.reshape(n_masks, -1)

    @property
    def size(self) -> int:
        return len(self.subspaces)

    def transition_from_mask_probs(self, pm: np.ndarray) -> np.ndarray:
        n = self.size
        # fixed-axis reduction keeps each row independent of the batch size
        T = (pm[..., :, None] * self._one_hot).sum(axis=-2)
        return T.reshape(pm.shape[:-1] + (n, n))

    def transition_matrix(self, probs) -> np.ndarray:
        return self.transition_from_mask_probs(mask_probabilities(probs))

    def structure(self, support: np.ndarray) -> tuple:
        """(transient states, closed classes) reachable from {0} when only the
        masks flagged in ``support`` have positive probability."""
        key = support.tobytes()
        if key in self._structure:
            return self._structure[key]
        n = self.size
        adj = np.zeros((n, n), dtype=bool)
        for i in range(n):
            adj[i, self.table[i, support]] = True
        reach = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adj[i]):
                if j not in reach:
                    reach.add(int(j))
                    stack.append(int(j))
        _, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
        closed = []
        for lab in sorted({labels[i] for i in reach}):
            members = [i for i in range(n) if labels[i] == lab]
            outside = [j for i in members for j in np.flatnonzero(adj[i]) if labels[j] != lab]
            if not outside:
                closed.append(np.array(members))
        in_closed = {int(i) for c in closed for i in c}
        transient = np.array(sorted(i for i in reach if i not in in_closed), dtype=np.int64)
        result = (transient, closed)
        self._structure[key] = result
        return result


def _stationary(T: np.ndarray) -> np.ndarray:
    """Stationary vectors of a batch of irreducible stochastic matrices."""
    n = T.shape[-1]
    M = np.swapaxes(T, -1, -2) - np.eye(n)
    M[..., -1, :] = 1.0
    rhs = np.zeros(T.shape[:-1])
    rhs[..., -1] = 1.0
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def _limit_from_mask_probs(chain: SubspaceChain, pm: np.ndarray) -> np.ndarray:
    n_pts = pm.shape[0]
    out = np.zeros((n_pts, chain.size))
    if n_pts == 0:
        return out
    T = chain.transition_from_mask_probs(pm)
    support = pm > 0
    if support.all():
        groups = [(support[0], np.arange(n_pts))]
    else:
        patterns, inverse = np.unique(support, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        groups = [(pat, np.flatnonzero(inverse == g)) for g, pat in enumerate(patterns)]
    for pattern, rows in groups:
        transient, closed = chain.structure(pattern)
        Tg = T if rows.size == n_pts else T[rows]
        if transient.size == 0 and len(closed) == 1 and closed[0].size == chain.size:
            out[rows] = _stationary(Tg)
            continue
        if transient.size == 0:
            absorb = [np.ones(rows.size)]
        else:
            Q = Tg[:, transient[:, None], transient[None, :]]
            eye = np.eye(transient.size)
            start = int(np.flatnonzero(transient == 0)[0])
            absorb = []
            for cls in closed:
                R = Tg[:, transient[:, None], cls[None, :]].sum(axis=-1)
                h = np.linalg.solve(eye - Q, R[..., None])[..., 0]
                absorb.append(h[:, start])
        for cls, weight in zip(closed, absorb):
            if cls.size == 1:
                pi = np.ones((rows.size, 1))
            else:
                pi = _stationary(Tg[:, cls[:, None], cls[None, :]])
            out[rows[:, None], cls[None, :]] += weight[:, None] * pi
    return out


def limiting_distribution(chain: SubspaceChain, probs, method: str = "exact") -> np.ndarray:
    """Long-run (Cesaro) distribution of the chain started at {0}.

    ``method="exact"`` decomposes the chain into transient states and closed
    classes and solves for absorption and stationary probabilities directly.
    ``method="cesaro"`` runs averaged power iteration until successive
    averages differ by less than 1e-12; it handles a single point only.
    """
    probs = np.asarray(probs, dtype=float)
    if method == "cesaro":
        return _cesaro(chain.transition_matrix(probs), 1e-12, 10**6)
    if method != "exact":
        raise ValueError(method)
    flat = probs.reshape(-1, probs.shape[-1])
    out = _limit_from_mask_probs(chain, mask_probabilities(flat))
    return out.reshape(probs.shape[:-1] + (chain.size,))


def _cesaro(T: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    if T.ndim != 2:
        raise ValueError("Cesaro iteration takes a single probability point")
    p = np.zeros(T.shape[0])
    p[0] = 1.0
    avg = p.copy()
    for it in range(1, max_iter + 1):
        p = p @ T
        new = avg + (p - avg) / (it + 1)
        if np.max(np.abs(new - avg)) < tol:
            return new
        avg = new
    raise ConvergenceError(f"Cesaro average not converged after {max_iter} iterations")


def is_controllable(trellis: Trellis) -> bool:
    chain_full = Subspace.full(trellis.memory)
    sub = Subspace.zero(trellis.memory)
    all_erased = (1 << trellis.num_streams) - 1
    for _ in range(trellis.memory + 1):
        sub = forward_step(sub, trellis, all_erased)
    return sub == chain_full


class TransferFunction:
    """Per-stream extrinsic erasure probabilities of a trellis.

    Calling the object with an array of shape (..., num_streams) of input
    erasure probabilities returns an array of the same shape. Results are
    memoized on inputs quantized to 1e-12.
    """

    def __init__(self, trellis: Trellis, cache_size: int = 2_000_000):
        self.trellis = trellis
        self.forward = SubspaceChain(trellis, "forward")
        self.backward = SubspaceChain(trellis, "backward")
        self.cache_size = cache_size
        self._cache: Dict[bytes, np.ndarray] = {}
        if not is_controllable(trellis):
            log.warning("trellis (A, B) is not controllable; f(1,...,1) may be < 1")

    @property
    def num_streams(self) -> int:
        return self.trellis.num_streams

    @cached_property
    def undetermined(self) -> np.ndarray:
        """undetermined[s, iF, iB, mask]: stream s ambiguous on the
        consistent branch set (only masks with bit s set are used)."""
        subs = self.forward.subspaces
        n_sub = len(subs)
        n_str = self.num_streams
        n_masks = 1 << n_str
        out = np.zeros((n_str, n_sub, n_sub, n_masks), dtype=bool)
        funcs = [s.functional for s in self.trellis.streams]
        for a, F in enumerate(subs):
            for b, B in enumerate(subs):
                for mask in range(n_masks):
                    w = consistent_branches(F, B, self.trellis, mask)
                    for s in range(n_str):
                        out[s, a, b, mask] = any(gf2.dot(funcs[s], v) for v in w)
        return out

    @cached_property
    def _stream_tables(self) -> List[Tuple[List[int], np.ndarray]]:
        n_str = self.num_streams
        out = []
        for s in range(n_str):
            masks = [mk for mk in range(1 << n_str) if (mk >> s) & 1]
            U = np.moveaxis(self.undetermined[s][:, :, masks].astype(float), -1, 0)
            out.append((masks, np.ascontiguousarray(U)))
        return out

    def _compute(self, probs: np.ndarray, chunk: int = 1024) -> np.ndarray:
        if probs.shape[0] > chunk:
            return np.concatenate(
                [self._compute(probs[i:i + chunk]) for i in range(0, probs.shape[0], chunk)]
            )
        pm = mask_probabilities(probs)
        pi_f = _limit_from_mask_probs(self.forward, pm)
        pi_b = _limit_from_mask_probs(self.backward, pm)
        out = np.empty_like(probs)
        for s, (masks, U) in enumerate(self._stream_tables):
            others = probs.copy()
            others[:, s] = 1.0
            w = mask_probabilities(others)[:, masks]
            # average over other-stream masks, then backward, then forward subspace
            acc = (w[:, :, None, None] * U[None]).sum(axis=1)
            acc = (acc * pi_b[:, None, :]).sum(axis=-1)
            out[:, s] = (acc * pi_f).sum(axis=-1)
        return np.clip(out, 0.0, 1.0)

    def __call__(self, probs) -> np.ndarray:
        probs = np.asarray(probs, dtype=float)
        if probs.shape[-1] != self.num_streams:
            raise ValueError(f"expected {self.num_streams} stream probabilities")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("erasure probabilities must lie in [0, 1]")
        shape = probs.shape
        flat = np.ascontiguousarray(probs.reshape(-1, shape[-1]))
        keys = np.rint(flat / CACHE_QUANTUM).astype(np.int64)
        # evaluate at the snapped point so a cache hit returns exactly what a
        # fresh evaluation would
        snapped = np.clip(keys * CACHE_QUANTUM, 0.0, 1.0)
        key_bytes = [row.tobytes() for row in keys]
        out = np.empty_like(flat)
        miss = []
        for i, kb in enumerate(key_bytes):
            hit = self._cache.get(kb)
            if hit is None:
                miss.append(i)
            else:
                out[i] = hit
        if miss:
            # duplicate keys within one batch are computed once
            first: Dict[bytes, int] = {}
            uniq = []
            for i in miss:
                if key_bytes[i] not in first:
                    first[key_bytes[i]] = len(uniq)
                    uniq.append(i)
            vals = self._compute(snapped[uniq])
            if len(self._cache) + len(uniq) > self.cache_size:
                self._cache.clear()
            for j, i in enumerate(uniq):
                self._cache[key_bytes[i]] = vals[j]
            for i in miss:
                out[i] = vals[first[key_bytes[i]]]
        return out.reshape(shape)

    def clear_cache(self) -> None:
        self._cache.clear()


def extrinsic_erasure(tf: TransferFunction, probs) -> np.ndarray:
    return tf(probs)
