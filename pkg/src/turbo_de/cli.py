"""Command-line front end: ``turbo-de <command> [options]``.

Commands
  transfer    table of f(x; eps) and g(x) on a square grid (CSV)
  potential   U and U' curves for a list of eps values (CSV, optional JSON summary)
  thresholds  BP and potential thresholds (JSON)
  coupled     coupled thresholds per (L, m), optional wave snapshots (JSON, CSV)
  validate    exact transfer function against Monte-Carlo decoding (JSON)

Options may also come from a ``key=value`` file given with ``--config``;
keys are the long option names without dashes (``max-iter`` or
``max_iter``). Command-line flags win over the file.

CSV numbers use Python's ``format(v, ".12g")``, which ignores the locale.
Files are written to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .coupled import CouplingSpec, coupled_threshold, wave_profile_series
from .ensembles import ArityError, ScalarSystem, make_system
from .montecarlo import McConfig, simulate_extrinsic
from .potential import (
    bp_threshold, min_potential_above, min_unstable_fixed_point, potential_curve,
    potential_threshold, x_grid,
)
from .transfer import TransferFunction
from .trellis import GeneratorError, Trellis, load

DEFAULT_GEN = {"pcc": "1,5/7", "scc": "1,5/7", "bcc": "1 0 1/7; 0 1 5/7"}
Z_LIMIT = 4.0
PASS_FRACTION = 0.95


class ConfigError(ValueError):
    pass


class TaskFailed(RuntimeError):
    pass


# -- formatting and output -------------------------------------------------------

def fmt(v) -> str:
    return format(float(v), ".12g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_atomic(path: Optional[str], text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file; ``None`` or '-' means stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- argument types ----------------------------------------------------------------

def float_list(text: str) -> List[float]:
    try:
        return [float(t) for t in str(text).replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in str(text).replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def read_config(path: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turbo-de", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, tol: float) -> None:
        p.add_argument("--ensemble", choices=sorted(DEFAULT_GEN), default="pcc")
        p.add_argument("--gen", help="generator matrix, e.g. '1,5/7' or '1 0 1/7; 0 1 5/7'")
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=tol)

    p = sub.add_parser("transfer", help="tabulate f and g")
    common(p, 1e-6)
    p.add_argument("--grid", type=int, default=21, help="points per axis, 0 and 1 included")

    p = sub.add_parser("potential", help="potential curves")
    common(p, 1e-6)
    p.add_argument("--eps", type=float_list, default=[0.6428, 0.6554])
    p.add_argument("--grid", type=int, default=2000, help="x points on (0, 1]; x = 0 is added")
    p.add_argument("--summary", help="optional JSON file with per-eps extrema")

    p = sub.add_parser("thresholds", help="BP and potential thresholds")
    common(p, 1e-6)
    p.add_argument("--grid", type=int, default=2000)

    p = sub.add_parser("coupled", help="coupled thresholds and decoding waves")
    common(p, 1e-4)
    p.add_argument("--L", dest="L", type=int_list, default=[50])
    p.add_argument("--m", dest="m", type=int_list, default=[0, 1, 2, 3])
    p.add_argument("--max-iter", dest="max_iter", type=int, default=100_000)
    p.add_argument("--waves", help="CSV file for wave snapshots (iter,t,x)")
    p.add_argument("--wave-eps", dest="wave_eps", type=float, default=0.65)
    p.add_argument("--every", type=int, default=10)

    p = sub.add_parser("validate", help="exact transfer function vs Monte-Carlo")
    common(p, 1e-6)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--N", dest="N", type=int, default=2000, help="trellis sections per trial")
    p.add_argument("--trials", type=int, default=200)
    return parser


def _merge_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_config(args.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    cmd_parser = sub.choices[args.command]
    given = set()
    for tok in argv:
        if tok.startswith("--"):
            given.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    known = {a.dest: a for a in cmd_parser._actions if a.dest != "help"}
    for key, raw in cfg.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key in given or key == "config":
            continue
        action = known[key]
        try:
            value = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        setattr(args, key, value)
    return args


def _validate_args(args: argparse.Namespace) -> None:
    if args.tol <= 0:
        raise ConfigError("tol must be positive")
    grid = getattr(args, "grid", None)
    if args.command == "transfer" and grid < 2:
        raise ConfigError("transfer grid needs at least 2 points")
    if args.command in ("potential", "thresholds") and grid < 1000:
        raise ConfigError("grid must be at least 1000")
    for e in getattr(args, "eps", []) or []:
        if not 0 <= e <= 1:
            raise ConfigError(f"eps {e} outside [0, 1]")
    if args.command == "coupled":
        if any(v < 1 for v in args.L) or any(v < 0 for v in args.m):
            raise ConfigError("L must be >= 1 and m >= 0")
        if args.every < 1 or args.max_iter < 1:
            raise ConfigError("every and max-iter must be positive")
    if args.command == "validate" and args.points < 1:
        raise ConfigError("points must be positive")


def _trellis(args) -> Trellis:
    return load(args.gen or DEFAULT_GEN[args.ensemble])


# -- commands --------------------------------------------------------------------

def transfer_table(system: ScalarSystem, grid: int) -> str:
    axis = np.linspace(0.0, 1.0, grid)
    X, E = np.meshgrid(axis, axis, indexing="ij")
    F = system.f(X, E)
    G = system.g(axis)
    rows = ((X[i, j], E[i, j], F[i, j], G[i]) for i in range(grid) for j in range(grid))
    return csv_text(["x", "eps", "f", "g"], rows)


def potential_report(system: ScalarSystem, eps_list: Sequence[float], grid: int):
    """CSV text of the curves and a per-eps summary dict."""
    xs = np.concatenate([[0.0], x_grid(grid)])
    rows, summary = [], []
    for eps in eps_list:
        U, Up = potential_curve(system, xs, eps)
        rows.extend(zip(xs, np.full(xs.shape, eps), U, Up))
        inner = Up[1:]
        sign = np.sign(inner)
        crossings = int(np.count_nonzero(sign[:-1] * sign[1:] < 0))
        u = min_unstable_fixed_point(system, eps, grid)
        entry = {
            "eps": eps,
            "min_U_prime": float(inner.min()),
            "argmin_U_prime": float(xs[1 + int(np.argmin(inner))]),
            "interior_sign_changes": crossings,
            "u": u,
            "min_U_above_u": None,
            "argmin_U_above_u": None,
        }
        if u is not None:
            x_min, u_min = min_potential_above(system, eps, u, grid)
            entry["min_U_above_u"] = u_min
            entry["argmin_U_above_u"] = x_min
        summary.append(entry)
    return csv_text(["x", "eps", "U", "Uprime"], rows), summary


def thresholds_report(system: ScalarSystem, generator: str, tol: float, grid: int) -> dict:
    bp = bp_threshold(system, tol, grid)
    star = potential_threshold(system, tol, grid, bp=bp)
    return {
        "ensemble": system.name,
        "generator": generator,
        "eps_bp": bp.value,
        "eps_star": star.value,
        "tolerances": {"eps": tol, "grid": grid},
        "bp": bp.as_dict(),
        "potential": star.as_dict(),
    }


def coupled_report(system: ScalarSystem, generator: str, Ls: Sequence[int],
                   ms: Sequence[int], tol: float, max_iter: int) -> dict:
    results = []
    for L in Ls:
        for m in ms:
            r = coupled_threshold(system, CouplingSpec(L, m), tol, max_iter)
            entry = {"L": L, "m": m, "threshold": r.value}
            entry.update(r.as_dict())
            del entry["value"]
            results.append(entry)
    return {"ensemble": system.name, "generator": generator, "tol": tol,
            "max_iter": max_iter, "results": results}


def wave_table(system: ScalarSystem, spec: CouplingSpec, eps: float, every: int,
               max_iter: int) -> str:
    snaps = wave_profile_series(system, spec, eps, every, max_iter)
    rows = ((s.iteration, t + 1, v) for s in snaps for t, v in enumerate(s.profile))
    return csv_text(["iter", "t", "x"], ([str(i), str(t), x] for i, t, x in rows))


def z_scores(exact: np.ndarray, mc, samples: int) -> np.ndarray:
    """(MC - exact) / sigma with sigma floored at the Jeffreys binomial value.

    The floor keeps a saturated estimate (every trial 0 or 1, batch stderr 0)
    from producing an infinite score.
    """
    p = (mc.mean * samples + 0.5) / (samples + 1.0)
    floor = np.sqrt(p * (1.0 - p) / samples)
    sigma = np.maximum(mc.stderr, floor)
    return (mc.mean - exact) / sigma


def validate_report(trellis: Trellis, generator: str, points: int, sections: int,
                    trials: int, seed: int, extra_points: Sequence[Sequence[float]] = ()) -> dict:
    tf = TransferFunction(trellis)
    rng = np.random.default_rng(seed)
    probs = [np.asarray(p, dtype=float) for p in extra_points]
    probs += list(rng.random((points, trellis.num_streams)))
    records, within = [], 0
    for i, p in enumerate(probs):
        exact = tf(p)
        mc = simulate_extrinsic(trellis, p, McConfig(sections, trials, seed + 1 + i))
        z = z_scores(exact, mc, mc.samples)
        ok = bool(np.all(np.abs(z) <= Z_LIMIT))
        within += ok
        records.append({
            "probs": p.tolist(),
            "exact": exact.tolist(),
            "mc": mc.mean.tolist(),
            "stderr": mc.stderr.tolist(),
            "z": z.tolist(),
            "within": ok,
        })
    fraction = within / len(probs)
    return {
        "generator": generator,
        "sections": sections,
        "trials": trials,
        "seed": seed,
        "z_limit": Z_LIMIT,
        "fraction_within": fraction,
        "passed": fraction >= PASS_FRACTION,
        "points": records,
    }


def run(args: argparse.Namespace) -> None:
    trellis = _trellis(args)
    gen = args.gen or DEFAULT_GEN[args.ensemble]
    if args.command == "validate":
        report = validate_report(trellis, gen, args.points, args.N, args.trials, args.seed)
        write_atomic(args.out, json_text(report))
        if not report["passed"]:
            raise TaskFailed(f"validation: only {report['fraction_within']:.0%} of points "
                             f"within {Z_LIMIT} sigma")
        return
    system = make_system(args.ensemble, trellis)
    if args.command == "transfer":
        write_atomic(args.out, transfer_table(system, args.grid))
    elif args.command == "potential":
        text, summary = potential_report(system, args.eps, args.grid)
        write_atomic(args.out, text)
        if args.summary:
            write_atomic(args.summary, json_text({"ensemble": system.name, "generator": gen,
                                                  "curves": summary}))
    elif args.command == "thresholds":
        write_atomic(args.out, json_text(thresholds_report(system, gen, args.tol, args.grid)))
    elif args.command == "coupled":
        failures = []
        report = None
        try:
            report = coupled_report(system, gen, args.L, args.m, args.tol, args.max_iter)
        except RuntimeError as exc:
            failures.append(f"coupled thresholds: {exc}")
        if report is not None:
            write_atomic(args.out, json_text(report))
        if args.waves:
            spec = CouplingSpec(args.L[0], args.m[-1])
            try:
                write_atomic(args.waves, wave_table(system, spec, args.wave_eps,
                                                    args.every, args.max_iter))
            except (RuntimeError, ValueError) as exc:
                failures.append(f"wave snapshots: {exc}")
        if failures:
            raise TaskFailed("; ".join(failures))


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _merge_config(parser, argv)
        _validate_args(args)
        run(args)
    except (ConfigError, GeneratorError, ArityError, OSError) as exc:
        print(f"turbo-de: error: {exc}", file=sys.stderr)
        return 2
    except (TaskFailed, RuntimeError, ValueError) as exc:
        print(f"turbo-de: failed: {exc}", file=sys.stderr)
        return 1
    return 0
