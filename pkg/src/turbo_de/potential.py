"""Potential function, fixed points and BP / potential thresholds.

For an admissible pair (f, g) the potential is

    U(x; eps) = x g(x) - G(x) - F(g(x); eps),

with F and G the integrals of f and g from 0. Its derivative is
U'(x; eps) = (x - f(g(x); eps)) g'(x), so stationary points of U are fixed
points of the scalar recursion. All x-grids are uniform on (0, 1] with
x = 1 included.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .ensembles import ScalarSystem
from .quadrature import PANEL_TOL, cumulative_integral

GRID = 2000
ROOT_TOL = 1e-10
CONVERGED = 1e-9
MAX_RECURSION = 100_000
STALL = 1e-15


class PredicateDisagreement(RuntimeError):
    pass


@dataclass(frozen=True)
class PotentialEval:
    x: float
    eps: float
    U: float
    U_prime: float


@dataclass
class ThresholdResult:
    """Outcome of an eps bisection; ``trace`` holds (eps, verdict) probes."""

    value: float
    bracket_width: float
    iterations: int
    trace: List[Tuple[float, bool]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def verdicts_monotone(self) -> bool:
        good = [e for e, v in self.trace if v]
        bad = [e for e, v in self.trace if not v]
        return not good or not bad or max(good) < min(bad)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "bracket_width": self.bracket_width,
            "iterations": self.iterations,
            "trace": [[e, v] for e, v in self.trace],
            "notes": list(self.notes),
        }


def x_grid(n: int = GRID) -> np.ndarray:
    """n uniform points on (0, 1], endpoint included."""
    return np.arange(1, n + 1) / n


def _check_unit(name: str, v) -> None:
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(v > 1) or np.any(np.isnan(v)):
        raise ValueError(f"{name} must lie in [0, 1]")


def residual(sys: ScalarSystem, x, eps: float) -> np.ndarray:
    """h(x) = f(g(x); eps) - x."""
    x = np.asarray(x, dtype=float)
    return sys.f(sys.g(x), np.full(x.shape, float(eps))) - x


def _G(sys: ScalarSystem, x: np.ndarray, shortcut: bool) -> np.ndarray:
    if shortcut and sys.g_is_identity:
        return 0.5 * x * x
    return cumulative_integral(sys.g, x)


def potential_curve(sys: ScalarSystem, x, eps: float, shortcut: bool = True):
    """Vectorized U and U' at the points ``x`` for one eps.

    ``shortcut`` uses G(x) = x^2/2 when g is the identity; switching it off
    forces the quadrature path for G as well.
    """
    x = np.asarray(x, dtype=float)
    _check_unit("x", x)
    _check_unit("eps", eps)
    eps = float(eps)
    gx = sys.g(x)
    F = cumulative_integral(lambda z: sys.f(z, np.full(z.shape, eps)), gx)
    U = x * gx - _G(sys, x, shortcut) - F
    U_prime = (x - sys.f(gx, np.full(x.shape, eps))) * sys.g_prime(x)
    return U, U_prime


def potential(sys: ScalarSystem, x: float, eps: float, shortcut: bool = True) -> PotentialEval:
    U, Up = potential_curve(sys, np.array([float(x)]), eps, shortcut)
    return PotentialEval(float(x), float(eps), float(U[0]), float(Up[0]))


# -- fixed points --------------------------------------------------------------

def _bisect_root(fun, a: float, b: float, fa: float, tol: float = ROOT_TOL) -> float:
    """Sign change of ``fun`` inside [a, b], with fa = fun(a) != 0."""
    while b - a > tol:
        c = 0.5 * (a + b)
        fc = fun(c)
        if fc == 0:
            return c
        if (fc > 0) == (fa > 0):
            a, fa = c, fc
        else:
            b = c
    return 0.5 * (a + b)


def _stability(left: float, right: float) -> str:
    if left > 0 and right < 0:
        return "stable"
    if left < 0 and right > 0:
        return "unstable"
    return "marginal"


def fixed_points(sys: ScalarSystem, eps: float, grid: int = GRID) -> List[Tuple[float, str]]:
    """Fixed points x* = f(g(x*); eps) with a stability label.

    Roots are sign changes of h(x) = f(g(x); eps) - x between grid points,
    refined by bisection. x = 0 is always reported; a tangency that does not
    change sign at grid resolution is not.
    """
    if grid < 1000:
        raise ValueError("grid must be at least 1000")
    _check_unit("eps", eps)
    xs = x_grid(grid)
    h = residual(sys, xs, eps)
    scalar = lambda x: float(residual(sys, np.array([x]), eps)[0])  # noqa: E731
    out = [(0.0, "stable" if h[0] < 0 else ("unstable" if h[0] > 0 else "marginal"))]
    sign = np.sign(h)
    for i in range(grid):
        if sign[i] == 0:
            left = sign[i - 1] if i > 0 else np.sign(h[0])
            right = sign[i + 1] if i + 1 < grid else -1.0
            out.append((float(xs[i]), _stability(left, right)))
        elif i + 1 < grid and sign[i + 1] != 0 and sign[i + 1] != sign[i]:
            root = _bisect_root(scalar, xs[i], xs[i + 1], h[i])
            out.append((root, _stability(sign[i], sign[i + 1])))
    return out


# -- BP threshold ----------------------------------------------------------------

def _grid_margin(sys: ScalarSystem, eps: float, grid: int) -> float:
    """min over (0, 1] of x - f(g(x); eps), grid minimum polished by Brent."""
    xs = x_grid(grid)
    gap = -residual(sys, xs, eps)
    i = int(np.argmin(gap))
    best = float(gap[i])
    lo = xs[i - 1] if i > 0 else xs[0] * 0.5
    hi = xs[min(i + 1, grid - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: float(-residual(sys, np.array([x]), eps)[0]),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": ROOT_TOL})
        best = min(best, float(res.fun))
    return best


def _recursion_converges(sys: ScalarSystem, eps: float, max_iter: int) -> bool:
    x = np.array([1.0])
    e = np.array([float(eps)])
    for _ in range(max_iter):
        nxt = sys.f(sys.g(x), e)
        if nxt[0] < CONVERGED:
            return True
        if abs(nxt[0] - x[0]) < STALL:
            return False
        x = nxt
    return False


def no_nonzero_fixed_point(sys: ScalarSystem, eps: float, grid: int = GRID,
                           max_iter: int = MAX_RECURSION) -> bool:
    """BP predicate, computed by a grid scan and by running the recursion.

    The two must agree; on disagreement both are repeated once with a finer
    grid and a longer recursion before giving up.
    """
    a = _grid_margin(sys, eps, grid) > 0
    b = _recursion_converges(sys, eps, max_iter)
    if a == b:
        return a
    a = _grid_margin(sys, eps, 10 * grid) > 0
    b = _recursion_converges(sys, eps, 10 * max_iter)
    if a != b:
        raise PredicateDisagreement(
            f"eps={eps!r}: grid predicate {a}, recursion predicate {b}")
    return a


def _bisect(pred, lo: float, hi: float, tol: float,
            trace: List[Tuple[float, bool]]) -> Tuple[float, float, int]:
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = bool(pred(mid))
        trace.append((mid, v))
        it += 1
        if v:
            lo = mid
        else:
            hi = mid
    return lo, hi, it


def bp_threshold(sys: ScalarSystem, tol: float = 1e-6, grid: int = GRID) -> ThresholdResult:
    """Largest eps for which the uncoupled recursion has no nonzero fixed point."""
    if tol < 1e-8:
        raise ValueError("tol must be at least 1e-8")
    pred = lambda e: no_nonzero_fixed_point(sys, e, grid)  # noqa: E731
    trace: List[Tuple[float, bool]] = []
    top = pred(1.0)
    trace.append((1.0, top))
    if top:
        return ThresholdResult(1.0, 0.0, 1, trace)
    lo, hi, it = _bisect(pred, 0.0, 1.0, tol, trace)
    return ThresholdResult(0.5 * (lo + hi), hi - lo, it + 1, trace)


# -- potential threshold ---------------------------------------------------------

def min_unstable_fixed_point(sys: ScalarSystem, eps: float, grid: int = GRID) -> Optional[float]:
    """u(eps): smallest x > 0 with f(g(x); eps) >= x, or None if there is none.

    If the first grid point already qualifies it is returned as is (the
    crossing sits closer to 0 than the grid can resolve).
    """
    _check_unit("eps", eps)
    xs = x_grid(grid)
    h = residual(sys, xs, eps)
    hit = np.flatnonzero(h >= 0)
    if hit.size == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return float(xs[0])
    a, b = float(xs[i - 1]), float(xs[i])
    while b - a > ROOT_TOL:
        c = 0.5 * (a + b)
        if residual(sys, np.array([c]), eps)[0] >= 0:
            b = c
        else:
            a = c
    return b


def min_potential_above(sys: ScalarSystem, eps: float, start: float,
                        grid: int = GRID) -> Tuple[float, float]:
    """(argmin, min) of U(x; eps) over [start, 1]: grid scan, then Brent."""
    xs = start + (1.0 - start) * np.arange(grid + 1) / grid
    U, _ = potential_curve(sys, xs, eps)
    i = int(np.argmin(U))
    best_x, best = float(xs[i]), float(U[i])
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid)]
    if hi > lo:
        res = minimize_scalar(lambda x: potential(sys, x, eps).U, bounds=(lo, hi),
                              method="bounded", options={"xatol": ROOT_TOL})
        if res.fun < best:
            best_x, best = float(res.x), float(res.fun)
    return best_x, best


def potential_threshold(sys: ScalarSystem, tol: float = 1e-6, grid: int = GRID,
                        bp: Optional[ThresholdResult] = None) -> ThresholdResult:
    """Largest eps whose potential stays positive on [u(eps), 1].

    The bisection runs over (eps_BP, 1]; ``bp`` may carry a precomputed BP
    threshold. A probe where u(eps) does not exist counts as positive (no
    nonzero fixed point to compare against) and is noted.
    """
    if tol < 1e-8:
        raise ValueError("tol must be at least 1e-8")
    bp = bp or bp_threshold(sys, tol, grid)
    notes: List[str] = []

    def pred(eps: float) -> bool:
        u = min_unstable_fixed_point(sys, eps, grid)
        if u is None:
            notes.append(f"eps={eps:.10g}: u(eps) undefined, predicate vacuous")
            return True
        return min_potential_above(sys, eps, u, grid)[1] > 0

    trace: List[Tuple[float, bool]] = []
    lo = min(bp.value + 0.5 * bp.bracket_width, 1.0)
    top = pred(1.0)
    trace.append((1.0, top))
    if top:
        return ThresholdResult(1.0, 0.0, 1, trace, notes)
    lo, hi, it = _bisect(pred, lo, 1.0, tol, trace)
    return ThresholdResult(0.5 * (lo + hi), hi - lo, it + 1, trace, notes)


__all__ = [
    "PANEL_TOL", "PotentialEval", "ThresholdResult", "PredicateDisagreement",
    "x_grid", "residual", "potential", "potential_curve", "fixed_points",
    "no_nonzero_fixed_point", "bp_threshold", "min_unstable_fixed_point",
    "min_potential_above", "potential_threshold",
]
