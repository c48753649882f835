"""Command-line driver: scenario runs, refinement ladders, parameter sweeps,
invariant verification, and the polytrope oracle.

Output contract: diagnostics CSV with a fixed header, a JSON summary with
fixed keys (regime, e0, E_w0, l, T1_star, termination, tau_b, plus extras),
and a manifest listing every file written. CSV bodies are byte-identical
across invocations of the same config: floats are serialized with Python's
shortest round-trip repr and rows end in a bare newline.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 invariant-suite failure.
"""
from __future__ import annotations

import argparse
import copy
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from efviz import __version__, analysis, lane_emden, predictors
from efviz.config import ConfigError, build_config, load_document
from efviz.solver import NONFINITE, manufactured_error, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4


def _resolve_out_dir(flag: str | None) -> Path:
    if flag:
        out = Path(flag)
    elif os.environ.get("EFVIZ_OUT_DIR"):
        out = Path(os.environ["EFVIZ_OUT_DIR"])
    else:
        out = Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, table: dict, stride: int = 1) -> None:
    cols = list(table)
    n_rows = len(next(iter(table.values())))
    rows = list(range(0, n_rows, stride))
    if rows and rows[-1] != n_rows - 1:
        rows.append(n_rows - 1)  # the terminal row carries the blow-up record
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in rows:
            fh.write(",".join(_fmt(table[c][i]) for c in cols) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _summary(result, cfg) -> dict:
    regime = predictors.classify_regime(cfg.u0, cfg.u1, cfg.grid, cfg.p, cfg.power_mode)
    try:
        horizon = predictors.blowup_horizon(cfg.u0, cfg.u1, cfg.p, cfg.grid)
        t1_tau = horizon.tau_bound
        t1_t = horizon.t_bound if math.isfinite(horizon.t_bound) else None
    except predictors.HypothesisViolationError:
        t1_tau = None
        t1_t = None
    return {
        "regime": regime.regime,
        "e0": regime.e0,
        "E_w0": regime.e_w0,
        "l": cfg.kernel.ell,
        "T1_star": t1_tau,
        "T1_star_exp": t1_t,
        "termination": result.termination,
        "tau_b": result.tau_b,
        "tau_end": float(result.taus[-1]),
        "termination_tau": result.termination_tau,
        "sup_max": float(np.max(result.sup_norms)),
        "narrow": regime.narrow,
        "eps_E": regime.eps_e,
        "form": cfg.form,
        "p": cfg.p,
        "n": cfg.grid.n,
        "dtau": cfg.dtau,
        "kernel": cfg.kernel.describe(),
    }


def _manifest(out_dir: Path, stem: str, doc: dict, result, outputs: list[Path], dur: float) -> Path:
    path = out_dir / f"{stem}_manifest.json"
    payload = {
        "version": __version__,
        "config": doc,
        "termination": result.termination if result is not None else None,
        "tau_b": result.tau_b if result is not None else None,
        "outputs": [str(p) for p in outputs],
        "duration_seconds": dur,
    }
    _write_json(path, payload)
    return path


def cmd_run(args) -> int:
    doc = load_document(args.config)
    cfg = build_config(doc)
    out_dir = _resolve_out_dir(args.out_dir)
    stem = Path(args.config).stem
    started = time.monotonic()
    result = run(cfg)
    table = analysis.diagnostics_table(result)
    csv_path = out_dir / f"{stem}_diagnostics.csv"
    _write_csv(csv_path, table, stride=cfg.record_every)
    summary_path = out_dir / f"{stem}_summary.json"
    _write_json(summary_path, _summary(result, cfg))
    dur = time.monotonic() - started
    _manifest(out_dir, stem, doc, result, [csv_path, summary_path], dur)
    print(f"{result.termination} at tau = {result.termination_tau:.6g}; wrote {csv_path}")
    return EXIT_NUMERICAL if result.termination == NONFINITE else EXIT_OK


def cmd_convergence(args) -> int:
    doc = load_document(args.config)
    if doc.get("manufactured") is None:
        raise ConfigError(
            "convergence ladders need a manufactured solution so each level has an exact answer"
        )
    out_dir = _resolve_out_dir(args.out_dir)
    stem = Path(args.config).stem
    started = time.monotonic()
    levels, ns, dtaus, errors, orders = [], [], [], [], []
    for k in range(args.levels):
        cfg = build_config(doc, refine_levels=k)
        result = run(cfg)
        if result.termination == NONFINITE:
            return EXIT_NUMERICAL
        err = manufactured_error(result)
        levels.append(k)
        ns.append(cfg.grid.n)
        dtaus.append(cfg.dtau)
        errors.append(err)
        orders.append(math.log2(errors[-2] / err) if k else math.nan)
    slope = float(np.polyfit(np.log(dtaus), np.log(errors), 1)[0])

    print(f"{'level':>5} {'n':>6} {'dtau':>12} {'error':>14} {'order':>8}")
    for k in range(args.levels):
        otxt = f"{orders[k]:8.3f}" if math.isfinite(orders[k]) else "       -"
        print(f"{levels[k]:>5} {ns[k]:>6} {dtaus[k]:>12.6g} {errors[k]:>14.6e} {otxt}")
    print(f"least-squares order: {slope:.3f}")

    table = {
        "level": np.array(levels, dtype=float),
        "n": np.array(ns, dtype=float),
        "dtau": np.array(dtaus),
        "error": np.array(errors),
        "order": np.array(orders),
    }
    csv_path = out_dir / f"{stem}_convergence.csv"
    _write_csv(csv_path, table)
    dur = time.monotonic() - started
    path = out_dir / f"{stem}_convergence_manifest.json"
    _write_json(path, {
        "version": __version__,
        "config": doc,
        "levels": args.levels,
        "errors": errors,
        "orders": orders[1:],
        "least_squares_order": slope,
        "outputs": [str(csv_path)],
        "duration_seconds": dur,
    })
    return EXIT_OK


def _parse_grid_spec(spec: str) -> list[tuple[str, list]]:
    axes = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ConfigError(f"sweep axis {chunk!r} is not of the form key=v1,v2")
        key, _, values = chunk.partition("=")
        parsed = []
        for raw in values.split(","):
            raw = raw.strip()
            try:
                parsed.append(tomllib.loads(f"v = {raw}")["v"])
            except tomllib.TOMLDecodeError:
                parsed.append(raw)
        if not parsed:
            raise ConfigError(f"sweep axis {key!r} has no values")
        axes.append((key.strip(), parsed))
    if not axes:
        raise ConfigError("empty sweep grid")
    return axes


def _set_dotted(doc: dict, dotted: str, value) -> None:
    node = doc
    parts = dotted.split(".")
    for part in parts[:-1]:
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"sweep key {dotted!r} descends through non-table {part!r}")
        node = nxt
    node[parts[-1]] = value


def _sweep_point(doc: dict, out_dir: str, stem: str) -> dict:
    """Run one sweep point in a worker process; never raises."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    try:
        cfg = build_config(doc)
    except ConfigError as exc:
        return {"dir": out_dir, "error": str(exc), "exit": EXIT_CONFIG}
    result = run(cfg)
    table = analysis.diagnostics_table(result)
    csv_path = out / f"{stem}_diagnostics.csv"
    _write_csv(csv_path, table, stride=cfg.record_every)
    summary_path = out / f"{stem}_summary.json"
    _write_json(summary_path, _summary(result, cfg))
    _manifest(out, stem, doc, result, [csv_path, summary_path], time.monotonic() - started)
    code = EXIT_NUMERICAL if result.termination == NONFINITE else EXIT_OK
    return {"dir": out_dir, "termination": result.termination, "tau_b": result.tau_b, "exit": code}


def cmd_sweep(args) -> int:
    doc = load_document(args.config)
    axes = _parse_grid_spec(args.grid)
    out_root = _resolve_out_dir(args.out_dir)
    stem = Path(args.config).stem
    points = list(itertools.product(*(vals for _, vals in axes)))
    keys = [key for key, _ in axes]

    jobs = []
    for i, combo in enumerate(points):
        point_doc = copy.deepcopy(doc)
        for key, value in zip(keys, combo):
            _set_dotted(point_doc, key, value)
        jobs.append((point_doc, str(out_root / f"{stem}_point_{i:03d}"), stem, dict(zip(keys, combo))))

    results = [None] * len(jobs)
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        futures = {pool.submit(_sweep_point, d, o, s): i for i, (d, o, s, _) in enumerate(jobs)}
        for fut, i in futures.items():
            results[i] = fut.result()
    for (_, _, _, overrides), res in zip(jobs, results):
        res["overrides"] = overrides

    worst = max(res["exit"] for res in results)
    _write_json(out_root / f"{stem}_sweep_manifest.json", {
        "version": __version__,
        "config": doc,
        "grid": args.grid,
        "points": results,
        "exit": worst,
    })
    for res in results:
        tag = res.get("termination", "config_error")
        print(f"{res['dir']}: {tag} (exit {res['exit']})")
    return worst


def cmd_verify(args) -> int:
    doc = load_document(args.config)
    cfg = build_config(doc)
    out_dir = _resolve_out_dir(args.out_dir)
    stem = Path(args.config).stem
    started = time.monotonic()
    result = run(cfg)
    if result.termination == NONFINITE:
        print("run hit non-finite values; nothing to verify", file=sys.stderr)
        return EXIT_NUMERICAL
    rows = analysis.run_invariant_suite(result)
    all_ok = True
    for row in rows:
        mark = "PASS" if row.passed else "FAIL"
        all_ok &= row.passed
        print(f"{mark} {row.name}: measured = {row.measured:.6g}, tolerance = {row.tolerance:.6g}")
    report = out_dir / f"{stem}_verify.json"
    _write_json(report, {
        "version": __version__,
        "config": doc,
        "termination": result.termination,
        "rows": [
            {"name": r.name, "measured": r.measured, "tolerance": r.tolerance, "passed": r.passed}
            for r in rows
        ],
        "passed": all_ok,
        "duration_seconds": time.monotonic() - started,
    })
    print(f"wrote {report}")
    return EXIT_OK if all_ok else EXIT_INVARIANT


def cmd_lane_emden(args) -> int:
    out_dir = _resolve_out_dir(args.out_dir)
    prob = lane_emden.LaneEmdenProblem(p=args.p, t_max=args.tmax, dt=args.dt)
    ts, us = lane_emden.solve_lane_emden(prob)
    exact = lane_emden.closed_form(args.p, ts)
    rel = lane_emden.relative_error(us, exact)
    table = {"t": ts, "u": us, "u_closed_form": exact, "rel_err": rel}
    csv_path = out_dir / f"lane_emden_p{args.p}.csv"
    _write_csv(csv_path, table)
    print(f"max relative error {float(np.max(rel)):.3e} over t in [{ts[0]:.4g}, {ts[-1]:.4g}]; "
          f"wrote {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efviz",
        description="Simulate and verify a 1-D viscoelastic blow-up model on the log-time axis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument("--out-dir", default=None,
                       help="output directory (default: $EFVIZ_OUT_DIR or the working directory)")

    p_run = sub.add_parser("run", help="integrate one scenario and emit diagnostics")
    p_run.add_argument("config")
    add_out(p_run)
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="refinement ladder against a manufactured solution")
    p_conv.add_argument("config")
    p_conv.add_argument("--levels", type=int, default=4)
    add_out(p_conv)
    p_conv.set_defaults(func=cmd_convergence)

    p_sweep = sub.add_parser("sweep", help="cartesian parameter sweep, one run per point")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--grid", required=True,
                         help="sweep spec, e.g. 'p=3,5;initial.u0.amplitude=1,2'")
    p_sweep.add_argument("--workers", type=int, default=1)
    add_out(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the invariant suite on a scenario")
    p_verify.add_argument("config")
    add_out(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_le = sub.add_parser("lane-emden", help="polytrope oracle CSV for p in {1, 5}")
    p_le.add_argument("--p", type=int, choices=[1, 5], required=True)
    p_le.add_argument("--dt", type=float, default=1e-3)
    p_le.add_argument("--tmax", type=float, default=10.0)
    add_out(p_le)
    p_le.set_defaults(func=cmd_lane_emden)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
