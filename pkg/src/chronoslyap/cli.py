"""Command-line front end.

Reads one config file per concern (time scale / system / cost), dispatches
the solvers and analyses, and writes machine-readable CSV/JSON artifacts.
Exit codes: 0 success, 1 failed reduction check, 2 validation error,
3 numerical failure; numerical failures also leave an ``error.json`` with
the error name in the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import errors as err
from .lyapunov import (
    CostMatrix,
    GramianSolution,
    cdle_direct_solution,
    ddle_recursion_solution,
    solve_tsale_pointwise,
    solve_tsdle,
    solve_tsdle_stationary,
    stationary_initial_condition,
    tsale_residual,
)
from .stability import hilger_boundary, stability_report
from .timescale import TimeScaleWindow, build_grid, window_from_spec, window_to_spec
from .transition import SystemMatrix
from .verify import lyapunov_trace, simulate

_VALIDATION_ERRORS = (
    err.InvalidParameter,
    err.EmptyWindow,
    err.NotInTimeScale,
    err.ReversedBounds,
    err.GridMismatch,
    err.NonSymmetricM,
    err.NonSymmetricInput,
    err.NonSymmetric,
    json.JSONDecodeError,
    FileNotFoundError,
    KeyError,
    ValueError,
)


def _threads() -> int:
    raw = os.environ.get("CHRONOSLYAP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else _fmt(cell) for cell in row
        ))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def load_window(path: str) -> TimeScaleWindow:
    return window_from_spec(_load_json(path))


def load_system(path: str) -> SystemMatrix:
    spec = _load_json(path)
    n = int(spec["n"])
    block = spec["A"]
    if "constant" in block:
        A = SystemMatrix.from_constant(np.asarray(block["constant"], float))
    elif "schedule" in block:
        times = [float(t) for t, _ in block["schedule"]]
        mats = [np.asarray(m, float) for _, m in block["schedule"]]
        A = SystemMatrix.from_schedule(times, np.stack(mats))
    else:
        raise err.InvalidParameter("system spec needs A.constant or A.schedule")
    if A.n != n:
        raise err.InvalidParameter(f"system spec says n = {n} but A is {A.n}x{A.n}")
    return A


def load_signal_csv(path: str, grid) -> "ScalarSignal":
    """Tabulated scalar signal from a (t, value) CSV, aligned to the grid."""
    import csv as _csv

    from .tscalc import ScalarSignal

    table = {}
    with open(path, newline="", encoding="utf-8") as handle:
        for row in _csv.reader(handle):
            if not row or row[0].strip().lower() in ("t", "time"):
                continue
            table[float(row[0])] = float(row[1])
    values = []
    for t in grid.times:
        key = float(t)
        if key not in table:
            matches = [v for tv, v in table.items()
                       if abs(tv - key) <= grid.window.tol]
            if not matches:
                raise err.InvalidParameter(
                    f"signal CSV has no sample at grid time {key}"
                )
            values.append(matches[0])
        else:
            values.append(table[key])
    return ScalarSignal.from_table(grid, values)


def load_cost(path: str) -> CostMatrix:
    spec = _load_json(path)
    n = int(spec["n"])
    block = spec["M"]
    if "constant" not in block:
        raise err.InvalidParameter("cost spec needs M.constant")
    M = CostMatrix.from_constant(np.asarray(block["constant"], float))
    if M.n != n:
        raise err.InvalidParameter(f"cost spec says n = {n} but M is {M.n}x{M.n}")
    return M


def _load_initial(mode: str, n: int, w, A, M, dense_step: float,
                  tail_tol: float) -> np.ndarray | None:
    """P0 for the dynamic solves; None signals the stationary composition."""
    if mode == "zero":
        return np.zeros((n, n))
    if mode == "stationary":
        return None
    if mode.startswith("file:"):
        payload = _load_json(mode[5:])
        return np.asarray(payload["P0"], dtype=float)
    raise err.InvalidParameter(f"unknown --ic mode {mode!r}")


def _check_dims(A: SystemMatrix, M: CostMatrix) -> None:
    if A.n != M.n:
        raise err.InvalidParameter(
            f"system is {A.n}x{A.n} but cost is {M.n}x{M.n}"
        )


def _gramian_rows(sol: GramianSolution) -> tuple[list[str], list[list]]:
    n = sol.values.shape[1]
    header = ["t"] + [f"P_{i}_{j}" for i in range(n) for j in range(n)]
    header += ["residual_norm", "min_eigenvalue"]
    mins = sol.min_eigenvalues()
    rows = []
    for k, t in enumerate(sol.times):
        row = [t] + list(sol.values[k].reshape(-1)) + [
            sol.residuals[k] if np.isfinite(sol.residuals[k]) else "nan",
            mins[k],
        ]
        rows.append(row)
    return header, rows


# -- subcommands --------------------------------------------------------------


def _cmd_solve_tsale(args) -> int:
    w = load_window(args.ts)
    A = load_system(args.system)
    M = load_cost(args.cost)
    _check_dims(A, M)
    grid = build_grid(w, args.dense_step)
    out = Path(args.out)

    # pointwise family: one algebraic solve per grid point, with A and mu
    # frozen at that point; the window end has no forward graininess and is
    # skipped.
    idx = list(range(len(grid) - 1))

    def solve_one(i: int):
        t = float(grid.times[i])
        mu_t = float(grid.mus[i])
        meta: dict = {}
        A_t = A.at(t)
        P = solve_tsale_pointwise(A_t, M.at(t), mu_t, meta=meta)
        res = tsale_residual(A_t, P, M.at(t), mu_t)
        return t, P, res, float(np.linalg.eigvalsh(P)[0]), meta

    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_one, idx))
    else:
        results = [solve_one(i) for i in idx]

    n = A.n
    header = ["t"] + [f"P_{i}_{j}" for i in range(n) for j in range(n)]
    header += ["residual_norm", "min_eigenvalue"]
    rows = [
        [t] + list(P.reshape(-1)) + [res, mineig]
        for t, P, res, mineig, _ in results
    ]
    _write_csv(out / "tsale.csv", header, rows)
    _write_json(out / "summary.json", {
        "equation": "TSALE",
        "horizon": max(
            (m.get("terms") or 0) for *_, m in results
        ),
        "tail_bound": max(float(m.get("tail") or 0.0) for *_, m in results),
        "max_residual": max(r for _, _, r, _, _ in results),
        "points": len(results),
        "time_scale": window_to_spec(w),
    })
    return 0


def _cmd_solve_tsdle(args) -> int:
    w = load_window(args.ts)
    A = load_system(args.system)
    M = load_cost(args.cost)
    _check_dims(A, M)
    out = Path(args.out)
    P0 = _load_initial(args.ic, A.n, w, A, M, args.dense_step, args.tail_tol)
    if P0 is None:
        sol = solve_tsdle_stationary(A, M, w, w.t0, tail_tol=args.tail_tol,
                                     dense_step=args.dense_step)
    else:
        sol = solve_tsdle(A, M, P0, w, w.t0, dense_step=args.dense_step)
    header, rows = _gramian_rows(sol)
    _write_csv(out / "tsdle.csv", header, rows)
    _write_json(out / "summary.json", {
        **{k: v for k, v in sol.meta.items() if not isinstance(v, np.ndarray)},
        "time_scale": window_to_spec(w),
    })
    return 0


def _cmd_stationary(args) -> int:
    w = load_window(args.ts)
    A = load_system(args.system)
    M = load_cost(args.cost)
    _check_dims(A, M)
    P0 = stationary_initial_condition(A, M, w, w.t0, tail_tol=args.tail_tol,
                                      dense_step=args.dense_step)
    _write_json(Path(args.out) / "stationary.json", {
        "P0": [[float(x) for x in row] for row in P0],
        "min_eigenvalue": float(np.linalg.eigvalsh(P0)[0]),
        "time_scale": window_to_spec(w),
    })
    return 0


def _cmd_stability(args) -> int:
    w = load_window(args.ts)
    A = load_system(args.system)
    out = Path(args.out)
    grid = build_grid(w, args.dense_step)
    report = stability_report(A, w, grid=grid)

    header = ["Re", "Im", "in_hmin", "gamma_hat", "converged"]
    rows = []
    for e in report.entries:
        rows.append([
            e.lam.real, e.lam.imag, str(e.in_hmin).lower(),
            "-inf" if e.gamma is None else _fmt(e.gamma),
            str(bool(e.diagnostic and e.diagnostic.converged)).lower(),
        ])
    _write_csv(out / "eigenvalues.csv", header, rows)
    _write_json(out / "report.json", {
        "verdict": report.verdict,
        "mu_max": report.hmin.mu_max,
        "hmin_verdict": report.hmin.verdict,
        "eigenvalues": [
            {
                "re": e.lam.real,
                "im": e.lam.imag,
                "in_hmin": e.in_hmin,
                "gamma_hat": e.gamma,
                "converged": bool(e.diagnostic and e.diagnostic.converged),
                "mechanism": e.mechanism,
                "s_r_hit_count": len(e.s_r_hits),
                "uniform_regressivity": {"min": e.reg_min, "max": e.reg_max},
            }
            for e in report.entries
        ],
        "notes": list(report.notes),
        "time_scale": window_to_spec(w),
    })
    if args.plot_data:
        mu_max = report.hmin.mu_max
        rows = []
        if mu_max > 0:
            for z in hilger_boundary(mu_max):
                rows.append([z.real, z.imag, "hmin_boundary"])
        for lam in report.spectrum:
            rows.append([lam.real, lam.imag, "eigenvalue"])
        _write_csv(out / "disks.csv", ["Re", "Im", "kind"], rows)
    return 0


def _parse_x0(raw: str, n: int) -> np.ndarray:
    x0 = np.asarray([float(v) for v in raw.split(",")], dtype=float)
    if x0.shape != (n,):
        raise err.InvalidParameter(f"--x0 must have {n} components")
    return x0


def _cmd_simulate(args) -> int:
    w = load_window(args.ts)
    A = load_system(args.system)
    x0 = _parse_x0(args.x0, A.n)
    traj = simulate(A, w, x0, dense_step=args.dense_step)
    header = ["t"] + [f"x_{i}" for i in range(A.n)]
    rows = [
        [t] + list(state) for t, state in zip(traj.times, traj.states)
    ]
    _write_csv(Path(args.out) / "trajectory.csv", header, rows)
    return 0


def _cmd_verify(args) -> int:
    w = load_window(args.ts)
    A = load_system(args.system)
    M = load_cost(args.cost)
    _check_dims(A, M)
    x0 = _parse_x0(args.x0, A.n) if args.x0 else np.ones(A.n)
    out = Path(args.out)
    grid = build_grid(w, args.dense_step)
    sol = solve_tsdle_stationary(A, M, w, w.t0, tail_tol=args.tail_tol,
                                 grid=grid)
    traj = simulate(A, w, x0, grid=grid)
    trace = lyapunov_trace(sol, traj)
    m = len(trace.times)
    header = ["t"] + [f"x_{i}" for i in range(A.n)] + ["V", "V_delta"]
    rows = []
    for k in range(m):
        rows.append(
            [trace.times[k]] + list(traj.states[k])
            + [trace.V[k], trace.V_delta[k] if trace.valid[k] else "nan"]
        )
    _write_csv(out / "trajectory.csv", header, rows)
    _write_json(out / "verify.json", {
        "V_positive": trace.verdicts.V_positive,
        "V_delta_nonpositive": trace.verdicts.V_delta_nonpositive,
        "V_delta_negative": trace.verdicts.V_delta_negative,
        "v_delta_agreement_max": trace.agreement_max,
        "max_residual": sol.meta["max_residual"],
    })
    return 0


def reduce_discrepancies(w_r: TimeScaleWindow, w_z: TimeScaleWindow,
                         A: SystemMatrix, M: CostMatrix,
                         ic_mode: str = "zero", dense_step: float = 0.002,
                         tail_tol: float = 1e-8) -> dict:
    """Max relative gap between the unified dynamic solve and the
    specialized continuous/discrete evaluations on a pair of windows.

    With the stationary initial matrix the comparison covers the leading
    half window only: the seed's truncation tail is amplified along the
    transport at the rate the integrand decays, so the trailing half would
    measure seed noise rather than path agreement.
    """
    if not A.is_constant or not M.is_constant:
        raise err.InvalidParameter("reduction check requires constant A, M")
    out = {}
    frac = 0.5 if ic_mode == "stationary" else 1.0

    def initial(w):
        if ic_mode == "zero":
            return np.zeros((A.n, A.n))
        if ic_mode == "stationary":
            return stationary_initial_condition(
                A, M, w, w.t0, tail_tol=tail_tol, dense_step=dense_step
            )
        payload = _load_json(ic_mode[5:])
        return np.asarray(payload["P0"], dtype=float)

    P0r = initial(w_r)
    sol_r = solve_tsdle(A, M, P0r, w_r, w_r.t0, dense_step=dense_step)
    t_max = w_r.t0 + frac * (w_r.t_end - w_r.t0)
    compare = np.nonzero(sol_r.times <= t_max + w_r.tol)[0]
    worst = 0.0
    for k in compare[:: max(1, len(compare) // 64)]:
        direct = cdle_direct_solution(A.constant, M.constant, P0r,
                                      float(sol_r.times[k]), w_r.t0)
        gap = float(np.linalg.norm(sol_r.values[k] - direct, "fro"))
        worst = max(worst, gap / max(1.0, float(np.linalg.norm(direct, "fro"))))
    out["continuous_discrepancy"] = worst

    P0z = initial(w_z)
    sol_z = solve_tsdle(A, M, P0z, w_z, w_z.t0, dense_step=1.0)
    rec = ddle_recursion_solution(A, M, P0z, sol_z.times)
    t_max = w_z.t0 + frac * (w_z.t_end - w_z.t0)
    keep = sol_z.times <= t_max + w_z.tol
    scale = np.maximum(1.0, np.linalg.norm(rec[keep], axis=(1, 2)))
    out["discrete_discrepancy"] = float(
        np.max(np.linalg.norm(sol_z.values[keep] - rec[keep],
                              axis=(1, 2)) / scale)
    )
    out["max_discrepancy"] = max(out.values())
    return out


def _cmd_reduce_check(args) -> int:
    w_r = load_window(args.ts_r)
    w_z = load_window(args.ts_z)
    A = load_system(args.system)
    M = load_cost(args.cost)
    _check_dims(A, M)
    result = reduce_discrepancies(w_r, w_z, A, M, ic_mode=args.ic,
                                  dense_step=args.dense_step,
                                  tail_tol=args.tail_tol)
    result["tolerance"] = 1e-8
    result["passed"] = bool(result["max_discrepancy"] <= 1e-8)
    _write_json(Path(args.out) / "reduce_check.json", result)
    return 0 if result["passed"] else 1


# -- parser / entry -----------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, cost: bool = True,
                ic: bool = False, x0: bool = False) -> None:
    p.add_argument("--ts", required=True, help="time-scale spec JSON")
    p.add_argument("--system", required=True, help="system spec JSON")
    if cost:
        p.add_argument("--cost", required=True, help="cost spec JSON")
    if ic:
        p.add_argument("--ic", default="zero",
                       help="initial matrix: zero | stationary | file:PATH")
    if x0:
        p.add_argument("--x0", default=None, help="comma-separated state")
    p.add_argument("--dense-step", type=float, default=0.01,
                   dest="dense_step")
    p.add_argument("--tail-tol", type=float, default=1e-8, dest="tail_tol")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronoslyap",
        description="Lyapunov equations and stability analysis for linear "
                    "systems on time scales",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-tsale", help="pointwise algebraic solves")
    _add_common(p)
    p.set_defaults(func=_cmd_solve_tsale)

    p = sub.add_parser("solve-tsdle", help="dynamic solve from --ic")
    _add_common(p, ic=True)
    p.set_defaults(func=_cmd_solve_tsdle)

    p = sub.add_parser("stationary", help="stationary initial matrix")
    _add_common(p)
    p.set_defaults(func=_cmd_stationary)

    p = sub.add_parser("stability", help="spectral stability report")
    p.add_argument("--ts", required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--dense-step", type=float, default=0.01,
                   dest="dense_step")
    p.add_argument("--plot-data", action="store_true", dest="plot_data",
                   help="also dump disk-boundary/spectrum samples as CSV")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("simulate", help="trajectory of x^delta = A x")
    p.add_argument("--ts", required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--dense-step", type=float, default=0.01,
                   dest="dense_step")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="Lyapunov trace along a trajectory")
    _add_common(p, x0=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("reduce-check",
                       help="unified vs specialized solutions on R/Z windows")
    p.add_argument("--ts-r", required=True, dest="ts_r")
    p.add_argument("--ts-z", required=True, dest="ts_z")
    p.add_argument("--system", required=True)
    p.add_argument("--cost", required=True)
    p.add_argument("--ic", default="zero")
    p.add_argument("--dense-step", type=float, default=0.002,
                   dest="dense_step")
    p.add_argument("--tail-tol", type=float, default=1e-8, dest="tail_tol")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_reduce_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = Path(getattr(args, "out", "."))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(f"validation error: {exc}", file=sys.stderr)
        try:
            _write_json(out_dir / "error.json", payload)
        except OSError:
            pass
        return 2
    except err.ChronosLyapError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(f"numerical failure: {exc}", file=sys.stderr)
        try:
            _write_json(out_dir / "error.json", payload)
        except OSError:
            pass
        return 3


if __name__ == "__main__":
    sys.exit(main())
