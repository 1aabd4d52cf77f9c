"""Command-line front end.

Subcommands: simulate, basin, boundary-fit, stability, hopf, cycles,
bautin, check-claims.  Exit codes: 0 success, 2 usage or configuration
error, 3 numerical failure.  All writes go to the --out directory;
figures (SVG via matplotlib) land next to the CSV/JSON outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .blowup import BlowupConfig, OutcomeLabel, classify_with_trajectory
from .config import load_params, save_params
from .errors import BlowlabError, ParameterDomainError
from .model import ModelKind, ModelParams, State, params_from_dict, params_to_dict
from .solve import History, IntegratorConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _resolve_params(args) -> ModelParams:
    params = load_params(args.params) if args.params else ModelParams()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ParameterDomainError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if overrides:
        d = params_to_dict(params)
        d.update(overrides)
        params = params_from_dict(d)
    return params


def _integ_config(args) -> IntegratorConfig:
    kw = {}
    if getattr(args, "rtol", None) is not None:
        kw["rtol"] = args.rtol
    if getattr(args, "atol", None) is not None:
        kw["atol"] = args.atol
    if getattr(args, "max_steps", None) is not None:
        kw["max_steps"] = args.max_steps
    return IntegratorConfig(**kw)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    params = _resolve_params(args)
    cfg = BlowupConfig(theta=args.theta, t_max=args.tmax)
    icfg = _integ_config(args)
    ic = State(args.ic[0], args.ic[1])
    out = _outdir(args)
    outcome, traj = classify_with_trajectory(params, ic, cfg, icfg)
    traj.to_csv(out / "trajectory.csv", n_samples=args.samples)
    with open(out / "outcome.json", "w", encoding="utf-8") as fh:
        json.dump(outcome.to_json_dict(), fh, indent=2)
        fh.write("\n")
    save_params(params, out / "params.cfg")
    if args.plot:
        from .plots import plot_timeseries
        plot_timeseries(traj, out / "timeseries.svg", logy=not args.linear_y,
                        title=f"{params.kind.value}, ic=({ic.X:g},{ic.Y:g})")
    print(f"{outcome.label.value}"
          + (f", T* = {outcome.t_star:.6e}" if outcome.t_star is not None else "")
          + f"; outputs in {out}")
    return EXIT_NUMERICAL if outcome.label is OutcomeLabel.FAILURE else EXIT_OK


def _cmd_basin(args) -> int:
    from .basin import GridSpec, conjecture_region_check, sweep
    params = _resolve_params(args)
    spec = GridSpec((args.xmin, args.xmax), (args.ymin, args.ymax), args.nx, args.ny)
    cfg = BlowupConfig(theta=args.theta, t_max=args.tmax)
    icfg = _integ_config(args)
    out = _outdir(args)
    workers = args.threads if args.threads else (os.cpu_count() or 1)
    grid = sweep(params, spec, cfg, icfg, workers=workers)
    grid.to_csv(out / "basin.csv")
    rep = conjecture_region_check(grid, params, args.delta1)
    summary = {
        "counts": grid.counts(),
        "conjecture_region": {
            "delta1": args.delta1,
            "sufficient_holds": rep.sufficient_holds,
            "violations": rep.violations,
            "predicate_cells": rep.predicate_cells,
        },
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if args.plot:
        from .plots import plot_basin
        plot_basin(grid, out / "basin.svg")
    print(f"labels: {grid.counts()}; conjecture violations: {rep.violations}"
          f"/{rep.predicate_cells}; outputs in {out}")
    return EXIT_OK if grid.counts()["Failure"] == 0 else EXIT_NUMERICAL


def _cmd_boundary_fit(args) -> int:
    from .basin import (INVERSE_LOG, RATIONAL, BasinGrid, GridSpec,
                        extract_boundary, fit_boundary, sweep)
    params = _resolve_params(args)
    cfg = BlowupConfig(theta=args.theta, t_max=args.tmax)
    out = _outdir(args)
    if args.basin_csv:
        grid = BasinGrid.from_csv(args.basin_csv)
    else:
        spec = GridSpec((args.xmin, args.xmax), (args.ymin, args.ymax), args.nx, args.ny)
        workers = args.threads if args.threads else (os.cpu_count() or 1)
        grid = sweep(params, spec, cfg, workers=workers)
        grid.to_csv(out / "basin.csv")
    curve = extract_boundary(grid, params, cfg, dy_tol=args.dy_tol)
    curve.to_csv(out / "boundary.csv")
    families = [RATIONAL, INVERSE_LOG] if args.family == "both" else [args.family]
    fits = []
    report = {"boundary_points": len(curve.x),
              "monotone": curve.monotone_decreasing_report(), "fits": {}}
    for family in families:
        fit = fit_boundary(curve, family)
        fits.append(fit)
        report["fits"][family] = fit.to_json_dict()
        print(f"{family}: params={tuple(round(v, 6) for v in fit.params)} "
              f"rmse={fit.rmse:.4g} converged={fit.converged}")
    with open(out / "boundary_fit.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(out / "boundary_fit.csv", "w", encoding="utf-8") as fh:
        fh.write("x,y," + ",".join(f"y_{f.family}" for f in fits) + "\n")
        preds = [f.predict(curve.x) for f in fits]
        for k in range(len(curve.x)):
            row = [f"{curve.x[k]:.17g}", f"{curve.y[k]:.17g}"]
            row += [f"{pred[k]:.17g}" for pred in preds]
            fh.write(",".join(row) + "\n")
    if args.plot:
        from .plots import plot_boundary_fit
        plot_boundary_fit(curve, fits, out / "boundary_fit.svg")
    return EXIT_OK


def _cmd_stability(args) -> int:
    from .bifurcate import classify_equilibria
    from .model import stability_threshold_C
    params = _resolve_params(args)
    eqs = classify_equilibria(params)
    rows = []
    for eq in eqs:
        rows.append({"kind": eq.kind.value,
                     "point": {"X": eq.point.X, "Y": eq.point.Y},
                     "det": eq.det, "trace": eq.trace,
                     "classification": eq.classification.value})
        print(f"{eq.kind.value:13s} ({eq.point.X:.6g}, {eq.point.Y:.6g})  "
              f"det={eq.det:+.6g} trace={eq.trace:+.6g}  {eq.classification.value}")
    try:
        ch = stability_threshold_C(params)
        print(f"Hopf threshold C_H = {ch:.6g} (equilibrium stable for C > C_H; C = {params.C:g})")
    except BlowlabError as exc:
        ch = None
        print(f"Hopf threshold undefined: {exc}")
    if args.out:
        out = _outdir(args)
        with open(out / "stability.json", "w", encoding="utf-8") as fh:
            json.dump({"equilibria": rows, "C_H": ch}, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_hopf(args) -> int:
    from .bifurcate import hopf_in_C
    params = _resolve_params(args)
    hp = hopf_in_C(params)
    kind = "supercritical" if hp.l1 < 0 else "subcritical"
    print(f"Hopf in C at C_H = {hp.value:.6g}; omega = {hp.omega:.6g}; "
          f"l1 = {hp.l1:+.6g} ({kind})")
    if args.out:
        out = _outdir(args)
        with open(out / "hopf.json", "w", encoding="utf-8") as fh:
            json.dump(hp.to_json_dict(), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_cycles(args) -> int:
    from .bifurcate import continue_cycles, two_cycle_certificate
    params = _resolve_params(args)
    out = _outdir(args)
    cert = two_cycle_certificate(params)
    print(f"inner: y={cert['inner'].anchor.Y:.6f} period={cert['inner'].period:.4f} "
          f"mu={cert['inner'].floquet:.5f} ({'stable' if cert['inner'].stable else 'unstable'})")
    print(f"outer: y={cert['outer'].anchor.Y:.6f} period={cert['outer'].period:.4f} "
          f"mu={cert['outer'].floquet:.5f} ({'stable' if cert['outer'].stable else 'unstable'})")
    print(f"nested: {cert['nested']}")
    branch = continue_cycles(params, args.vary, (args.range_from, args.range_to),
                             seed=cert["outer"])
    branch.to_csv(out / "cycles.csv")
    folds = [{"param": m.param, "coefficient": m.coefficient, "kind": m.kind}
             for m in branch.folds]
    with open(out / "folds.json", "w", encoding="utf-8") as fh:
        json.dump({"vary": args.vary, "certificate": {
            "inner": cert["inner"].to_json_dict(),
            "outer": cert["outer"].to_json_dict(),
            "nested": cert["nested"]}, "folds": folds}, fh, indent=2)
        fh.write("\n")
    for m in branch.folds:
        print(f"LPC marker ({m.kind}) at {args.vary} = {m.param:.6f}, "
              f"coefficient {m.coefficient:+.3e}")
    if args.plot:
        from .plots import plot_branch
        plot_branch(branch, out / "cycles.svg")
    return EXIT_OK


def _cmd_bautin(args) -> int:
    from .bifurcate import find_bautin
    params = _resolve_params(args)
    box1 = (args.box[0], args.box[1])
    box2 = (args.box[2], args.box[3])
    bp = find_bautin(params, args.p1, args.p2, box1, box2)
    print(f"Bautin point: ({args.p1}, {args.p2}) = ({bp.v1:.6f}, {bp.v2:.6f}); "
          f"omega = {bp.hopf.omega:.6g}, l1 = {bp.hopf.l1:+.3e}")
    if args.out:
        out = _outdir(args)
        with open(out / f"bautin_{args.p1}_{args.p2}.json", "w", encoding="utf-8") as fh:
            json.dump(bp.to_json_dict(), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_check_claims(args) -> int:
    from .claims import run_claims
    report = run_claims(theta=args.theta, max_steps=args.max_steps)
    print(report.format_table())
    if args.out:
        out = _outdir(args)
        with open(out / "claims.json", "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    return EXIT_OK if report.all_passed else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="blowlab",
        description="Predator-prey blow-up laboratory: simulation, basins, bifurcations.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, with_out=True):
        p.add_argument("--params", help="parameter file (key = value, or .json)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one parameter (repeatable)")
        if with_out:
            p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("simulate", help="integrate one run and classify it")
    add_common(p)
    p.add_argument("--ic", nargs=2, type=float, metavar=("X0", "Y0"),
                   default=(78.0, 30.0),
                   help="initial state (constant history for delayed kinds)")
    p.add_argument("--theta", type=float, default=1e8, help="blow-up threshold")
    p.add_argument("--tmax", type=float, default=50.0, help="bounded-run horizon")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--samples", type=int, default=1001, help="CSV sampling points")
    p.add_argument("--plot", action="store_true", help="write timeseries.svg")
    p.add_argument("--linear-y", action="store_true", dest="linear_y",
                   help="linear predator axis in the plot (default log scale)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("basin", help="classify a grid of initial conditions")
    add_common(p)
    p.add_argument("--nx", type=int, default=300)
    p.add_argument("--ny", type=int, default=300)
    p.add_argument("--xmin", type=float, default=0.0)
    p.add_argument("--xmax", type=float, default=100.0)
    p.add_argument("--ymin", type=float, default=0.0)
    p.add_argument("--ymax", type=float, default=100.0)
    p.add_argument("--theta", type=float, default=1e8)
    p.add_argument("--tmax", type=float, default=50.0)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--delta1", type=float, default=0.1,
                   help="margin for the conjectured-region report")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: hardware concurrency)")
    p.add_argument("--plot", action="store_true", help="write basin.svg raster")
    p.set_defaults(func=_cmd_basin)

    p = sub.add_parser("boundary-fit", help="extract and fit the blow-up boundary")
    add_common(p)
    p.add_argument("--basin-csv", help="reuse a previous basin.csv instead of sweeping")
    p.add_argument("--nx", type=int, default=120)
    p.add_argument("--ny", type=int, default=120)
    p.add_argument("--xmin", type=float, default=0.0)
    p.add_argument("--xmax", type=float, default=100.0)
    p.add_argument("--ymin", type=float, default=0.0)
    p.add_argument("--ymax", type=float, default=100.0)
    p.add_argument("--theta", type=float, default=1e8)
    p.add_argument("--tmax", type=float, default=50.0)
    p.add_argument("--dy-tol", type=float, default=0.05, dest="dy_tol")
    p.add_argument("--family", choices=["rational", "inverse_log", "both"], default="both")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_boundary_fit)

    p = sub.add_parser("stability", help="classify equilibria and print C_H")
    add_common(p, with_out=False)
    p.add_argument("--out", default=None, help="optional output directory for JSON")
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("hopf", help="Hopf point in C with first Lyapunov coefficient")
    add_common(p, with_out=False)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_hopf)

    p = sub.add_parser("cycles", help="two-cycle certificate and cycle continuation")
    add_common(p)
    p.add_argument("--vary", default="D", help="continuation parameter")
    p.add_argument("--from", type=float, default=0.46, dest="range_from")
    p.add_argument("--to", type=float, default=0.47, dest="range_to")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_cycles)

    p = sub.add_parser("bautin", help="locate a Bautin point in a parameter box")
    add_common(p, with_out=False)
    p.add_argument("--p1", default="D")
    p.add_argument("--p2", default="A")
    p.add_argument("--box", nargs=4, type=float, required=True,
                   metavar=("P1_LO", "P1_HI", "P2_LO", "P2_HI"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bautin)

    p = sub.add_parser("check-claims", help="run the desk-scale reproduction suite")
    p.add_argument("--theta", type=float, default=None,
                   help="override the blow-up threshold for the T* claims")
    p.add_argument("--max-steps", type=int, default=None, dest="max_steps",
                   help="override the integrator step budget")
    p.add_argument("--out", default=None, help="optional output directory for claims.json")
    p.set_defaults(func=_cmd_check_claims)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterDomainError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowlabError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
