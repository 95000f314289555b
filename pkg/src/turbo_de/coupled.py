"""Spatially coupled scalar density evolution.

Positions t = 1..L carry erasure probabilities x_t; positions outside the
chain are fixed at 0. One synchronous step is

    y_s     = 1/(1+m) * sum_{j=0..m} g(x_{s+j}),      s = 1-m .. L
    x_t_new = 1/(1+m) * sum_{k=0..m} f(y_{t-k}; eps),  t = 1 .. L

which is the coupled recursion with the inner and outer averages written
out. Identical component codes make f position independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .ensembles import ScalarSystem
from .potential import ThresholdResult, _bisect

CONV_TOL = 1e-10
ZERO_TOL = 1e-9
MAX_ITER = 100_000


class NonMonotoneTrace(RuntimeError):
    pass


@dataclass(frozen=True)
class CouplingSpec:
    L: int
    m: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be at least 1")
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if self.m > self.L:
            raise ValueError("m must not exceed L")

    @property
    def weight(self) -> float:
        return 1.0 / (1 + self.m)


@dataclass(frozen=True)
class WaveState:
    """Profile x_1..x_L (stored 0-based) after ``iteration`` steps."""

    profile: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        p = np.asarray(self.profile, dtype=float)
        if p.ndim != 1:
            raise ValueError("profile must be one-dimensional")
        if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
            raise ValueError("profile entries must lie in [0, 1]")
        object.__setattr__(self, "profile", p)

    @classmethod
    def ones(cls, L: int) -> "WaveState":
        return cls(np.ones(L), 0)

    def at(self, t: int) -> float:
        """x_t with 1-based t; zero outside the chain."""
        if 1 <= t <= self.profile.size:
            return float(self.profile[t - 1])
        return 0.0


@dataclass(frozen=True)
class CoupledResult:
    state: WaveState
    converged_to_zero: bool
    iterations: int
    last_delta: float
    converged: bool


def coupled_step(sys: ScalarSystem, spec: CouplingSpec, state: WaveState, eps: float) -> WaveState:
    L, m = spec.L, spec.m
    x = state.profile
    if x.size != L:
        raise ValueError(f"profile has {x.size} entries, spec has L={L}")
    # padded[i] = x_{i-m+1}; zeros on both sides
    padded = np.zeros(L + 2 * m)
    padded[m:m + L] = x
    gp = sys.g(padded)
    gp[:m] = 0.0
    gp[m + L:] = 0.0
    # y[s + m - 1] = y_s for s = 1-m .. L
    n_y = L + m
    y = np.zeros(n_y)
    for j in range(m + 1):
        y += gp[j:j + n_y]
    y *= spec.weight
    fy = sys.f(y, np.full(n_y, float(eps)))
    out = np.zeros(L)
    for k in range(m + 1):
        out += fy[m - k:m - k + L]
    out *= spec.weight
    return WaveState(np.clip(out, 0.0, 1.0), state.iteration + 1)


def coupled_fixed_point(sys: ScalarSystem, spec: CouplingSpec, eps: float,
                        max_iter: int = MAX_ITER, conv_tol: float = CONV_TOL,
                        start: Optional[WaveState] = None) -> CoupledResult:
    """Iterate from the all-ones profile until it stops moving or reaches zero."""
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if conv_tol <= 0:
        raise ValueError("conv_tol must be positive")
    state = start or WaveState.ones(spec.L)
    delta = np.inf
    for _ in range(max_iter):
        nxt = coupled_step(sys, spec, state, eps)
        delta = float(np.abs(nxt.profile - state.profile).max())
        state = nxt
        if state.profile.max() < ZERO_TOL:
            return CoupledResult(state, True, state.iteration, delta, True)
        if delta < conv_tol:
            return CoupledResult(state, False, state.iteration, delta, True)
    return CoupledResult(state, False, state.iteration, delta, False)


def coupled_threshold(sys: ScalarSystem, spec: CouplingSpec, tol: float = 1e-6,
                      max_iter: int = MAX_ITER, lo: float = 0.0,
                      hi: float = 1.0) -> ThresholdResult:
    """Largest eps for which the coupled chain decodes to the zero profile.

    ``lo``/``hi`` may narrow the initial bracket; ``lo`` must decode and
    ``hi`` must not (both are checked). Unconverged probes count as failures
    and are listed in ``notes``.
    """
    if tol < 1e-6:
        raise ValueError("tol must be at least 1e-6")
    notes: List[str] = []

    def pred(e: float) -> bool:
        res = coupled_fixed_point(sys, spec, e, max_iter)
        if not res.converged:
            notes.append(f"eps={e:.10g}: no convergence after {res.iterations} "
                         f"iterations (last delta {res.last_delta:.3g})")
        return res.converged_to_zero

    trace = []
    if hi >= 1.0 and pred(1.0):
        trace.append((1.0, True))
        return ThresholdResult(1.0, 0.0, 1, trace, notes)
    if lo > 0 and not pred(lo):
        raise ValueError(f"lower bracket eps={lo} does not decode")
    if hi < 1.0 and pred(hi):
        raise ValueError(f"upper bracket eps={hi} decodes")
    lo, hi, it = _bisect(pred, lo, min(hi, 1.0), tol, trace)
    result = ThresholdResult(0.5 * (lo + hi), hi - lo, it, trace, notes)
    if not result.verdicts_monotone():
        raise NonMonotoneTrace(f"verdicts not monotone in eps: {trace}")
    return result


def wave_profile_series(sys: ScalarSystem, spec: CouplingSpec, eps: float, every: int = 1,
                        max_iter: int = MAX_ITER, conv_tol: float = CONV_TOL) -> List[WaveState]:
    """Snapshots of the decoding wave every ``every`` iterations.

    The final profile is always included. At eps = 0 the chain clears in one
    step and the series is that single zero profile.
    """
    if every < 1:
        raise ValueError("every must be at least 1")
    state = WaveState.ones(spec.L)
    snaps: List[WaveState] = []
    for _ in range(max_iter):
        nxt = coupled_step(sys, spec, state, eps)
        delta = float(np.abs(nxt.profile - state.profile).max())
        state = nxt
        done = state.profile.max() < ZERO_TOL or delta < conv_tol
        if done or state.iteration % every == 0:
            snaps.append(state)
        if done:
            break
    return snaps
