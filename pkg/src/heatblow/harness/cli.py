"""Command line entry point: ``heatblow <subcommand>``.

Problem settings come from ``--config`` (the ``[problem]`` section of a run
config) with individual overrides such as ``--T`` or ``--p``; without a
config the ProblemSpec defaults apply.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from ..initial_data import InitialDataParams, build_y0
from ..kernel_lab import moment_ratios
from ..localization import Balls, localization_certificate
from ..lq_control import assemble_galerkin, composite_run, solve_riccati_backward
from ..shooting import SearchConfig, ShotConfig, boundary_degree, find_blowup_params, shoot
from ..solver_core import (Field, NonlinearFeedback, ProblemSpec, StopRule, estimate_blowup, integrate,
                           read_snapshots_csv, write_manifest, write_snapshots_csv)
from .config import ConfigError, load_config
from .criteria import CriterionResult
from .plotdata import emit_plotdata
from .scenarios import _json_default, _search_rect, _spectrum_rows, load_outcome, run_scenario


def _interval(raw: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in raw.split(","))
    return lo, hi


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem")
    g.add_argument("--config", help="run config whose [problem] section is used")
    g.add_argument("--T", type=float, dest="target_time")
    g.add_argument("--a", type=float, dest="target_point")
    g.add_argument("--p", type=float, dest="exponent")
    g.add_argument("--T1", type=float)
    g.add_argument("--grid-points", type=int, dest="grid_points")
    g.add_argument("--domain", type=_interval, dest="omega_domain")
    g.add_argument("--actuator", type=_interval)


def _spec(args) -> ProblemSpec:
    spec = load_config(args.config).spec if args.config else ProblemSpec()
    keys = ("target_time", "target_point", "exponent", "T1", "grid_points", "omega_domain", "actuator")
    changes = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return spec.replace(**changes) if changes else spec


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text)
    else:
        print(text)


def _shot_dict(r) -> dict:
    return {"d0": r.d0, "d1": r.d1, "status": r.status.value, "s_star": r.s_star, "s_end": r.s_end,
            "reason": r.reason, "phi": r.phi,
            "exit": r.phi_exit.to_dict() if r.phi_exit else None,
            "full_exit": r.full_exit.to_dict() if r.full_exit else None}


def _print_block(block: list[dict]) -> bool:
    ok = True
    for d in block:
        r = CriterionResult(d["number"], d["passed"], d["measured"], d["threshold"], d["runtime"])
        print(r.line())
        ok &= r.passed
    return ok


# --------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config_file)
    if args.output:
        cfg.output = Path(args.output)
    if args.workers:
        cfg.workers = args.workers
    outcome = run_scenario(cfg)
    for r in outcome.results:
        print(r.line())
    emit_plotdata(outcome.path)
    print(f"artifacts: {outcome.path}")
    return 0 if outcome.all_pass else 1


def cmd_simulate(args) -> int:
    spec = _spec(args)
    y0 = build_y0(InitialDataParams(args.d0, args.d1, spec))
    fb = NonlinearFeedback(spec.exponent, spec.actuator_mask())
    T = spec.target_time
    t_end = args.t_end if args.t_end is not None else T
    tr = integrate(spec, y0, fb, StopRule(t_end=t_end, y_max=args.y_max), snapshot_every=args.every)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshots_csv(out / "fields.csv", tr.snapshots)
    est = None
    if tr.reason == "Y_max" and len(tr.snapshots) >= 10:
        try:
            est = estimate_blowup(tr.snapshots, spec.exponent, spec.x, tail=min(50, len(tr.snapshots)))
        except ValueError as exc:
            print(f"no blowup estimate: {exc}", file=sys.stderr)
    write_manifest(out / "manifest.json", spec, tr.reason, est,
                   {"d0": args.d0, "d1": args.d1, "steps": tr.steps, "status": "COMPLETE"})
    print(f"{tr.reason} at t={tr.final.time:.17g}, max|y|={tr.final.sup:.6g}")
    return 0


def cmd_shoot(args) -> int:
    spec = _spec(args)
    r = shoot(args.d0, args.d1, spec, ShotConfig(y_max=args.y_max))
    _dump(_shot_dict(r), args.out)
    return 0


def cmd_search(args) -> int:
    spec = _spec(args)
    rect, notes = _search_rect(spec)
    sr = find_blowup_params(spec, SearchConfig(tol=args.tol, landscape=args.landscape, rect=rect),
                            ShotConfig(y_max=args.y_max))
    _dump({"d0": sr.d0, "d1": sr.d1, "success": sr.success, "shots": sr.shots, "window": sr.window,
           "best": _shot_dict(sr.best), "notes": notes,
           "landscape": [_shot_dict(r) for r in sr.landscape]}, args.out)
    return 0 if sr.success else 1


def cmd_degree(args) -> int:
    spec = _spec(args)
    rect, notes = _search_rect(spec)
    deg = boundary_degree(spec, args.samples, rect, ShotConfig(y_max=args.y_max), args.workers)
    _dump({"winding": deg.winding, "points": deg.points, "phi": [r.phi for r in deg.shots],
           "notes": notes}, args.out)
    return 0 if deg.winding == 1 else 1


def cmd_riccati(args) -> int:
    spec = _spec(args)
    sys_ = assemble_galerkin(spec, args.N)
    ric = solve_riccati_backward(sys_, args.tau, args.M)
    rows = _spectrum_rows(ric, args.every)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"ev_{k}" for k in range(args.N)])
        for r in rows:
            w.writerow([f"{v:.17g}" for v in r])
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_compose(args) -> int:
    spec = _spec(args)
    y0 = Field(np.sin(math.pi * spec.x), 0.0, spec.dx)
    comp = composite_run(spec, y0, args.d0, args.d1, N=args.N, M=args.M, y_max=args.y_max)
    est = comp.estimate
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshots_csv(out / "fields.csv", comp.trajectory)
    write_manifest(out / "manifest.json", spec, comp.reason, est,
                   {"phase1_ratio": comp.phase1_ratio, "switch_time": comp.switch_time, "status": "COMPLETE"})
    print(f"phase-1 ratio {comp.phase1_ratio:.3e}; t_est={est.t_est:.17g} a_est={est.a_est:.6g}")
    return 0


def cmd_kernel_verify(args) -> int:
    z = np.linspace(-args.zmax, args.zmax, args.nz)
    r = moment_ratios(args.theta, args.m, z)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["z", "ratio"])
        for zi, ri in zip(z, r):
            w.writerow([f"{zi:.17g}", f"{ri:.17g}"])
    finally:
        if args.out:
            fh.close()
    print(f"max ratio {float(np.max(r)):.17g} at z={float(z[int(np.argmax(r))]):.6g}", file=sys.stderr)
    return 0


def cmd_localize(args) -> int:
    spec = _spec(args)
    snaps = read_snapshots_csv(Path(args.run) / "fields.csv", spec.dx)
    balls = Balls.from_intervals(args.b0, args.b1, args.b2)
    rep = localization_certificate(snaps, spec, balls, checkpoints=args.checkpoints)
    _dump(rep.to_dict(), args.out)
    return 0 if rep.passed else 1


def cmd_report(args) -> int:
    manifest, block = load_outcome(args.run_dir)
    print(f"{args.run_dir}: {manifest.get('config', {}).get('kind', '?')} [{manifest.get('status')}]")
    if manifest.get("status") != "COMPLETE":
        if "error" in manifest:
            print(manifest["error"])
        return 1
    ok = _print_block(block)
    for p in emit_plotdata(args.run_dir):
        print(f"wrote {p}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatblow", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario config")
    p.add_argument("config_file")
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="nonlinear-feedback run from the constructed datum")
    _add_problem_args(p)
    p.add_argument("--d0", type=float, default=0.0)
    p.add_argument("--d1", type=float, default=0.0)
    p.add_argument("--y-max", type=float, default=1e8)
    p.add_argument("--t-end", type=float)
    p.add_argument("--every", type=float, default=1e-3, help="snapshot spacing in t")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("shoot", help="one shot, exit report as JSON")
    _add_problem_args(p)
    p.add_argument("--d0", type=float, required=True)
    p.add_argument("--d1", type=float, required=True)
    p.add_argument("--y-max", type=float, default=1e8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_shoot)

    p = sub.add_parser("search", help="find (d0, d1) by nested bisection")
    _add_problem_args(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--landscape", type=int, default=0)
    p.add_argument("--y-max", type=float, default=1e8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("degree", help="winding number of Phi on the rectangle boundary")
    _add_problem_args(p)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--y-max", type=float, default=1e8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_degree)

    p = sub.add_parser("riccati", help="Galerkin Riccati spectrum as CSV")
    _add_problem_args(p)
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--M", type=float, default=1e6)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--every", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("compose", help="two-phase run from sin(pi x)")
    _add_problem_args(p)
    p.add_argument("--d0", type=float, required=True)
    p.add_argument("--d1", type=float, default=0.0)
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--M", type=float, default=1e6)
    p.add_argument("--y-max", type=float, default=1e8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("kernel-verify", help="moment-bound ratios vs z as CSV")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--zmax", type=float, default=10.0)
    p.add_argument("--nz", type=int, default=2001)
    p.add_argument("--out")
    p.set_defaults(func=cmd_kernel_verify)

    p = sub.add_parser("localize", help="localization certificate for a saved run")
    _add_problem_args(p)
    p.add_argument("--run", required=True, help="directory containing fields.csv")
    p.add_argument("--b0", type=_interval, required=True)
    p.add_argument("--b1", type=_interval, required=True)
    p.add_argument("--b2", type=_interval, required=True)
    p.add_argument("--checkpoints", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("report", help="print the PASS/FAIL block and emit plot tables")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
