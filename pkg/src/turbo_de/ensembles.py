"""Scalar density-evolution systems (f, g) for PCC, SCC and BCC ensembles.

All three ensembles use identical component encoders, which collapses the
vector DE onto a scalar recursion x <- f(g(x); eps). The literal vector
recursions are kept next to the scalar ones so the collapse can be checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .transfer import TransferFunction
from .trellis import Trellis

FD_STEP = 1e-6


class ArityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarSystem:
    """Admissible pair: ``f(x, eps)`` and ``g(x)`` act elementwise on arrays."""

    name: str
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]
    g_is_identity: bool = False
    transfer: Optional[TransferFunction] = field(default=None, repr=False)

    def step(self, x, eps):
        """One uncoupled DE iteration f(g(x); eps)."""
        return self.f(self.g(x), eps)

    def trajectory(self, eps: float, iterations: int, x0: float = 1.0) -> np.ndarray:
        xs = np.empty(iterations + 1)
        xs[0] = x0
        x = np.array([x0])
        for i in range(iterations):
            x = self.step(x, np.array([eps]))
            xs[i + 1] = x[0]
        return xs


def _identity(x):
    return np.asarray(x, dtype=float)


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def centered_derivative(fun: Callable, h: float = FD_STEP) -> Callable:
    """Centered difference clamped to [0, 1] (one-sided at the ends)."""

    def deriv(x):
        x = np.asarray(x, dtype=float)
        lo = np.clip(x - h, 0.0, 1.0)
        hi = np.clip(x + h, 0.0, 1.0)
        return (fun(hi) - fun(lo)) / (hi - lo)

    return deriv


def _require(trellis: Trellis, n_inputs: int, n_parity: int, ensemble: str) -> None:
    if len(trellis.input_streams) != n_inputs or len(trellis.parity_streams) != n_parity:
        raise ArityError(
            f"{ensemble} needs {n_inputs} input and {n_parity} parity stream(s); "
            f"got {len(trellis.input_streams)} and {len(trellis.parity_streams)}"
        )


def _probs(*cols) -> np.ndarray:
    cols = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in cols])
    return np.stack(cols, axis=-1)


def pcc_system(trellis: Trellis, tf: Optional[TransferFunction] = None) -> ScalarSystem:
    _require(trellis, 1, 1, "PCC")
    tf = tf or TransferFunction(trellis)
    i_in = trellis.input_streams[0]

    def f(x, eps):
        eps = np.asarray(eps, dtype=float)
        return tf(_probs(eps * x, eps))[..., i_in]

    return ScalarSystem("pcc", f, _identity, _one, True, tf)


def scc_system(trellis: Trellis, tf: Optional[TransferFunction] = None) -> ScalarSystem:
    _require(trellis, 1, 1, "SCC")
    tf = tf or TransferFunction(trellis)
    i_in = trellis.input_streams[0]
    i_par = trellis.parity_streams[0]

    def f(y, eps):
        eps = np.asarray(eps, dtype=float)
        return eps * tf(_probs(eps * y, eps))[..., i_in]

    def g(x):
        out = tf(_probs(x, x))
        return (out[..., i_in] + out[..., i_par]) / 2.0

    return ScalarSystem("scc", f, g, centered_derivative(g), False, tf)


def bcc_system(trellis: Trellis, tf: Optional[TransferFunction] = None) -> ScalarSystem:
    _require(trellis, 2, 1, "BCC")
    tf = tf or TransferFunction(trellis)

    def f(x, eps):
        q = np.asarray(eps, dtype=float) * x
        out = tf(_probs(q, q, q))
        return (out[..., 0] + out[..., 1] + out[..., 2]) / 3.0

    return ScalarSystem("bcc", f, _identity, _one, True, tf)


ENSEMBLES = {"pcc": pcc_system, "scc": scc_system, "bcc": bcc_system}


def make_system(ensemble: str, trellis: Trellis) -> ScalarSystem:
    try:
        return ENSEMBLES[ensemble](trellis)
    except KeyError:
        raise ValueError(f"unknown ensemble {ensemble!r}") from None


# -- literal vector recursions ------------------------------------------------

def pcc_vector_de(tf: TransferFunction, eps: float, iterations: int) -> np.ndarray:
    """Upper/lower trellis extrinsic probabilities (p_U, p_L) per iteration."""
    p_u = p_l = 1.0
    out = [(p_u, p_l)]
    for _ in range(iterations):
        q_l = eps * p_l
        q_u = eps * p_u
        p_u_new = tf(np.array([q_l, eps]))[0]
        p_l_new = tf(np.array([q_u, eps]))[0]
        p_u, p_l = p_u_new, p_l_new
        out.append((p_u, p_l))
    return np.array(out)


def scc_vector_de(tf: TransferFunction, eps: float, iterations: int) -> np.ndarray:
    """Outer-decoder input erasure probability q_I per iteration.

    Starts from q_I = 1 (the outer decoder knows nothing), which is the
    state the scalar recursion calls x = 1.
    """
    q_i = 1.0
    out = [q_i]
    for _ in range(iterations):
        outer = tf(np.array([q_i, q_i]))
        p_os, p_op = outer[0], outer[1]
        q_o = eps * (p_os + p_op) / 2.0
        p_is = tf(np.array([q_o, eps]))[0]
        q_i = eps * p_is
        out.append(q_i)
    return np.array(out)


def rotated_edge_transfer(tf: TransferFunction, args: np.ndarray) -> np.ndarray:
    """Edge transfer functions of the symbol-rotating (time-varying) trellis.

    Edge k sits on trellis stream (k + r) mod 3 in one third of the sections
    for each shift r; its transfer function is the average over the three
    placements. With equal arguments every edge reduces to (f1 + f2 + f3)/3.
    """
    args = np.asarray(args, dtype=float)
    out = np.zeros(3)
    for r in range(3):
        placed = np.empty(3)
        for k in range(3):
            placed[(k + r) % 3] = args[k]
        res = tf(placed)
        for k in range(3):
            out[k] += res[(k + r) % 3]
    return out / 3.0


def bcc_vector_de(tf: TransferFunction, eps: float, iterations: int,
                  rotate: bool = True) -> np.ndarray:
    """Three-edge BCC recursion with the edge swap (1, 3, 2) between trellises.

    With ``rotate=False`` the plain time-invariant trellis is used; its three
    edge probabilities then drift apart and no scalar collapse exists.
    """
    x = np.ones(3)
    out = [x.copy()]
    for _ in range(iterations):
        args = eps * np.array([x[0], x[2], x[1]])
        x = rotated_edge_transfer(tf, args) if rotate else tf(args)
        out.append(x.copy())
    return np.array(out)


def bcc_symmetric_average(tf: TransferFunction, q: float) -> float:
    res = tf(np.array([q, q, q]))
    return (res[0] + res[1] + res[2]) / 3.0


# -- admissibility -------------------------------------------------------------

@dataclass
class Condition:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass
class AdmissibilityReport:
    system: str
    grid_size: int
    conditions: List[Condition]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def as_dict(self) -> Dict[str, dict]:
        return {c.name: {"passed": c.passed, "worst": c.worst, "detail": c.detail}
                for c in self.conditions}

    def __str__(self) -> str:
        lines = [f"{self.system} on {self.grid_size}x{self.grid_size} grid"]
        for c in self.conditions:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'} {c.name}: worst {c.worst:.3e} {c.detail}")
        return "\n".join(lines)


def _second_difference_max(values: np.ndarray, h: float) -> float:
    return _second_difference_argmax(values, h)[0]


def _second_difference_argmax(values: np.ndarray, h: float):
    """Largest |second difference| / h^2 and the grid index of its centre."""
    d2x = np.abs(values[2:, :] - 2 * values[1:-1, :] + values[:-2, :]) / h**2
    d2y = np.abs(values[:, 2:] - 2 * values[:, 1:-1] + values[:, :-2]) / h**2
    ix = np.unravel_index(np.argmax(d2x), d2x.shape)
    iy = np.unravel_index(np.argmax(d2y), d2y.shape)
    if d2x[ix] >= d2y[iy]:
        return float(d2x[ix]), (int(ix[0]) + 1, int(ix[1]))
    return float(d2y[iy]), (int(iy[0]), int(iy[1]) + 1)


def check_admissible(sys: ScalarSystem, grid_size: int = 21, tol: float = 1e-12,
                     smooth_ratio: float = 1.5) -> AdmissibilityReport:
    """Grid check of the admissible-system conditions.

    Smoothness is judged by how the largest second difference (scaled by
    1/h^2) reacts to halving the grid step: it stays put for a C^2 function
    and roughly doubles at a kink.
    """
    if grid_size < 11:
        raise ValueError("grid_size must be at least 11")
    grid = np.linspace(0.0, 1.0, grid_size)
    X, E = np.meshgrid(grid, grid, indexing="ij")
    F = sys.f(X, E)
    G = sys.g(grid)
    conds = []

    dx = np.diff(F, axis=0)
    de = np.diff(F, axis=1)
    worst_f = float(max(0.0, -dx.min(), -de.min()))
    in_range = bool(F.min() >= -tol and F.max() <= 1 + tol)
    conds.append(Condition("f_increasing", worst_f <= tol and in_range, worst_f,
                           "" if in_range else "f leaves [0, 1]"))

    dg = np.diff(G)
    worst_g = float(max(0.0, -dg.min()))
    g_range = bool(G.min() >= -tol and G.max() <= 1 + tol)
    conds.append(Condition("g_increasing", worst_g <= tol and g_range, worst_g,
                           "" if g_range else "g leaves [0, 1]"))

    zero = float(max(np.abs(F[0, :]).max(), np.abs(F[:, 0]).max(), abs(G[0])))
    conds.append(Condition("zero_conditions", zero <= tol, zero))

    fine = np.linspace(0.0, 1.0, 2 * grid_size - 1)
    Xf, Ef = np.meshgrid(fine, fine, indexing="ij")
    h = grid[1] - grid[0]
    coarse_f = _second_difference_max(F, h)
    fine_f, (ix, ie) = _second_difference_argmax(sys.f(Xf, Ef), h / 2)
    Gf = sys.g(fine)
    coarse_g = float(np.abs(np.diff(G, 2)).max() / h**2)
    fine_g = float(np.abs(np.diff(Gf, 2)).max() / (h / 2) ** 2)
    ratios = []
    for c, fn in ((coarse_f, fine_f), (coarse_g, fine_g)):
        # curvature below 1 cannot hide a kink visible on this grid
        ratios.append(fn / max(c, 1.0))
    worst = max(ratios)
    conds.append(Condition("smooth", worst <= smooth_ratio, worst,
                           f"max |f''| ~ {fine_f:.3g} near (x, eps) = "
                           f"({fine[ix]:.3g}, {fine[ie]:.3g}), max |g''| ~ {fine_g:.3g}"))
    return AdmissibilityReport(sys.name, grid_size, conds)
