"""Scenario orchestration: one scenario per acceptance criterion group.

``run_scenario`` writes into the configured output directory::

    manifest.json    config, spec, status (COMPLETE or INCOMPLETE), summary
    criteria.json    PASS/FAIL block for the criteria the scenario exercises
    *.csv            series, 17 significant digits

CSV content depends only on the config (and its seed); wall-clock timings go
to the JSON files only.
"""

from __future__ import annotations

import csv
import json
import math
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .. import __version__
from ..initial_data import AdmissibilityError, admissible_rect
from ..localization import Balls, argmax_distance_to_actuator, localization_certificate
from ..lq_control import assemble_galerkin, composite_run, null_control_run, solve_riccati_backward
from ..shooting import (SHOT_CSV_HEADER, SearchConfig, ShotConfig, ShotStatus, _y0, boundary_degree,
                        find_blowup_params, s_end_for, shoot_many)
from ..shrinking_set import check_membership
from ..similarity import DECOMP_CSV_HEADER, QuadratureError, decompose, hermite_h, hermite_norm2, mu_integral, to_similarity
from ..solver_core import (Field, FunctionControl, NonlinearFeedback, ProblemSpec, StopRule, estimate_blowup,
                           integrate, s_uniform_times, write_snapshots_csv)
from . import criteria as C
from .config import SCENARIOS, RunConfig

PROFILE_TAUS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


class RunWriter:
    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def csv(self, name: str, header: list[str], rows: Iterable) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self._track(name)
        return path

    def json(self, name: str, obj) -> Path:
        path = self.out / name
        path.write_text(json.dumps(obj, indent=2, default=_json_default))
        self._track(name)
        return path

    def snapshots(self, name: str, snaps) -> Path:
        write_snapshots_csv(self.out / name, snaps)
        self._track(name)
        return self.out / name

    def _track(self, name: str) -> None:
        if name not in self.files:
            self.files.append(name)


@dataclass
class RunOutcome:
    path: Path
    results: list[C.CriterionResult]
    summary: dict

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.results)


# --------------------------------------------------------------------------
# shared pieces


def _search_rect(spec: ProblemSpec):
    try:
        return admissible_rect(spec), []
    except AdmissibilityError as exc:
        return admissible_rect(spec, strict=False), [f"non-strict search rectangle: {exc}"]


def _decomp_rows(snaps, spec: ProblemSpec):
    """Decomposition and normalized margin rows for each snapshot before T."""
    drows, mrows = [], []
    for f in snaps:
        if f.time >= spec.target_time:
            continue
        sl = to_similarity(f, spec)
        try:
            dec = decompose(sl, spec.K0)
        except QuadratureError:
            dec = decompose(sl, spec.K0, rel_tol=None)
        m = check_membership(sl, dec, f, spec)
        drows.append(dec.csv_row())
        mrows.append([m.s] + [m.normalized[k] for k in MARGIN_FAMILIES])
    return drows, mrows


MARGIN_FAMILIES = ("q0", "q1", "q2", "qminus", "qe", "R2")


def blowup_run(spec: ProblemSpec, cfg: RunConfig, y_max: float, writer: RunWriter | None = None,
               prefix: str = "") -> dict:
    """Search ``(d0, d1)`` and re-run the best parameters to ``y_max``."""
    shot_cfg = ShotConfig(y_max=y_max, ds=cfg.param("ds", 0.02))
    rect, notes = _search_rect(spec)
    scfg = SearchConfig(tol=cfg.param("tol", 1e-10), landscape=cfg.param("landscape", 0, int), rect=rect)
    sr = find_blowup_params(spec, scfg, shot_cfg)
    T = spec.target_time
    s_times = s_uniform_times(T, spec.s0, shot_cfg.ds, s_end_for(spec, shot_cfg))
    extra = [T - tau for tau in PROFILE_TAUS if T - tau > 0]
    times = np.union1d(s_times, extra)
    fb = NonlinearFeedback(spec.exponent, spec.actuator_mask())
    tr = integrate(spec, _y0(sr.d0, sr.d1, spec), fb, StopRule(t_end=float(times[-1]), y_max=y_max),
                   dt_base=shot_cfg.dt_base, rho=shot_cfg.rho, snapshot_times=times)
    sset = set(float(t) for t in s_times)
    s_snaps = [f for f in tr.snapshots if f.time in sset or f.time == 0.0]
    est = estimate_blowup(s_snaps[-50:], spec.exponent, spec.x)
    prof = {}
    for tau in PROFILE_TAUS:
        hit = [f for f in tr.snapshots if f.time == T - tau]
        if hit:
            prof[tau] = C.profile_error(hit[0], spec)
    out = {
        "search": sr, "rect": rect, "notes": notes, "trajectory": tr, "s_snapshots": s_snaps,
        "estimate": est, "profile_errors": prof, "success": sr.success,
    }
    if writer is not None:
        writer.csv(f"{prefix}shots.csv", ["d0", "d1", "s_star", "exit"], sr.path)
        writer.csv(f"{prefix}rate.csv", ["p", "t", "max_abs_y", "t_est_minus_t"],
                   [(spec.exponent, f.time, f.sup, est.t_est - f.time) for f in s_snaps[1:]])
    return out


def _spec_summary(spec: ProblemSpec) -> dict:
    return {"T": spec.target_time, "a": spec.target_point, "p": spec.exponent, "dx": spec.dx}


# --------------------------------------------------------------------------
# scenarios


def scenario_hermite(cfg: RunConfig, w: RunWriter):
    res = C.check_hermite()
    rows = []
    for n in range(7):
        for m in range(7):
            got = mu_integral(lambda z: hermite_h(n, z) * hermite_h(m, z))
            rows.append((n, m, got, hermite_norm2(n) if n == m else 0.0))
    w.csv("hermite_gram.csv", ["n", "m", "integral", "expected"], rows)
    return [res], {}


def scenario_kernel(cfg: RunConfig, w: RunWriter):
    r2 = C.check_mehler()
    r3, rows = C.check_moment()
    w.csv("moment_ratios.csv", ["m", "theta", "max_ratio", "z_at_max"], rows)
    return [r2, r3], {}


def scenario_theorem21(cfg: RunConfig, w: RunWriter):
    spec = cfg.spec
    run = blowup_run(spec, cfg, cfg.param("y_max", 1e8), w)
    sr, tr = run["search"], run["trajectory"]
    T = spec.target_time
    keep = [tr.snapshots[0]] + [f for f in tr.snapshots if any(f.time == T - tau for tau in PROFILE_TAUS)]
    w.snapshots("fields.csv", keep)
    s_snaps = run["s_snapshots"]
    w.csv("profile_error.csv", ["s", "tau", "E"],
          [(-math.log(T - f.time), T - f.time, C.profile_error(f, spec)) for f in s_snaps[1:]])
    thin = s_snaps[:: max(int(cfg.param("decomp_every", 10, int)), 1)]
    drows, mrows = _decomp_rows(thin, spec)
    w.csv("decomposition.csv", DECOMP_CSV_HEADER, drows)
    w.csv("margins.csv", ["s"] + [f"norm_margin_{k}" for k in MARGIN_FAMILIES], mrows)
    best = sr.best
    report = {
        "status": best.status.value, "d0": sr.d0, "d1": sr.d1, "s_end": best.s_end,
        "reason": best.reason, "shots": sr.shots, "final_reason": tr.reason,
        "final_max_abs_y": tr.final.sup,
        "rectangle": {"bounds": run["rect"].bounds, "flags": list(run["rect"].flags)},
        "exit": best.phi_exit.to_dict() if best.phi_exit else None,
        "notes": run["notes"],
    }
    w.json("exit_report.json", report)
    est = run["estimate"]
    res = C.judge_profile(run["profile_errors"], run["success"])
    summary = {"d0": sr.d0, "d1": sr.d1, "status": best.status.value,
               "estimate": {"t_est": est.t_est, "a_est": est.a_est, "exponent": est.rate_exponent},
               "profile_errors": {f"{k:g}": v for k, v in run["profile_errors"].items()},
               "blowup": _spec_summary(spec)}
    return [res], summary


def scenario_rate(cfg: RunConfig, w: RunWriter):
    fits = []
    for p, key, default in ((2.0, "y_max_p2", 1e8), (3.0, "y_max_p3", 1e4)):
        spec = cfg.spec.replace(exponent=p)
        run = blowup_run(spec, cfg, cfg.param(key, default), w, prefix=f"p{p:g}_")
        est = run["estimate"]
        fits.append({"p": p, "exponent": est.rate_exponent, "a_est": est.a_est, "a": spec.target_point,
                     "t_est": est.t_est, "d0": run["search"].d0, "d1": run["search"].d1,
                     "success": run["success"], "y_max": cfg.param(key, default)})
    w.csv("rate_fits.csv", ["p", "exponent", "expected", "a_est", "t_est", "d0", "d1"],
          [(f["p"], f["exponent"], -1 / (f["p"] - 1), f["a_est"], f["t_est"], f["d0"], f["d1"]) for f in fits])
    res = C.judge_rate(fits, cfg.spec.dx)
    return [res], {"fits": fits, "blowup": _spec_summary(cfg.spec)}


def scenario_exit_modes(cfg: RunConfig, w: RunWriter):
    spec = cfg.spec
    rect, notes = _search_rect(spec)
    n = cfg.param("grid", 11, int)
    (l0, h0), (l1, h1) = rect.bounds
    pts = [(l0 + (h0 - l0) * i / (n - 1), l1 + (h1 - l1) * j / (n - 1)) for i in range(n) for j in range(n)]
    shots = shoot_many(pts, spec, ShotConfig(y_max=cfg.param("y_max", 1e8)), cfg.workers)
    rows, cons = [], []
    for r in shots:
        ev = r.full_exit or r.phi_exit
        if r.status is ShotStatus.EXIT and ev is not None:
            cons.append(ev.exit_constraint.value)
        rows.append(r.csv_row() + [r.full_exit.exit_constraint.value if r.full_exit else ""])
    w.csv("shots.csv", SHOT_CSV_HEADER + ["full_exit_constraint"], rows)
    res = C.judge_exit_modes(cons)
    return [res], {"samples": len(pts), "success_shots": sum(r.status is ShotStatus.SUCCESS for r in shots),
                   "notes": notes}


def scenario_degree(cfg: RunConfig, w: RunWriter):
    spec = cfg.spec
    rect, notes = _search_rect(spec)
    samples = cfg.param("samples", 32, int)
    deg = boundary_degree(spec, samples, rect, ShotConfig(y_max=cfg.param("y_max", 1e8)), cfg.workers)
    w.csv("degree.csv", SHOT_CSV_HEADER, [r.csv_row() for r in deg.shots])
    return [C.judge_degree(deg.winding, len(deg.points))], {"winding": deg.winding, "notes": notes}


def _spectrum_rows(ric, every: int = 1):
    n = len(ric.time_grid)
    idx = sorted(set(range(0, n, max(every, 1))) | {n - 1})
    return [[ric.time_grid[i]] + list(np.linalg.eigvalsh(ric.P[i])) for i in idx]


def scenario_riccati(cfg: RunConfig, w: RunWriter):
    res, rows = C.check_riccati_scalar(cfg.param("a_scalar", 1.0), cfg.param("tau", 1.0), cfg.param("M", 1e8))
    w.csv("riccati_scalar.csv", ["t", "P", "P_exact", "z", "z_exact"], rows)
    N = cfg.param("N", 32, int)
    sys = assemble_galerkin(cfg.spec, N)
    ric = solve_riccati_backward(sys, cfg.param("tau_galerkin", 0.5), cfg.param("M_galerkin", 1e6))
    w.csv("riccati_spectrum.csv", ["t"] + [f"ev_{k}" for k in range(N)], _spectrum_rows(ric, 10))
    return [res], {}


def _sine_data(spec: ProblemSpec) -> Field:
    return Field(np.sin(math.pi * spec.x), 0.0, spec.dx)


def scenario_null_control(cfg: RunConfig, w: RunWriter):
    spec = cfg.spec
    N = cfg.param("N", 32, int)
    M = cfg.param("M", 1e6)
    tau = cfg.param("tau", 0.5)
    y0 = _sine_data(spec)
    ratios = {}
    with C.Timer() as tm:
        sys = assemble_galerkin(spec, N)
        for k, MM in enumerate((M, 10 * M)):
            nc = null_control_run(spec, y0, tau, N=N, M=MM, sys=sys)
            ratios[MM] = nc.ratio
            if k == 0:
                first = nc
    tr = first.trajectory
    keep = tr.snapshots[::5]
    if keep[-1] is not tr.final:
        keep.append(tr.final)
    w.snapshots("fields.csv", keep)
    w.csv("quad_form.csv", ["t", "quad_form"], zip([f.time for f in tr.snapshots], first.quad_form))
    w.csv("null_ratios.csv", ["M", "ratio"], sorted(ratios.items()))
    res = C.judge_null_control(ratios, M, tm.elapsed)
    return [res], {"ratios": {f"{k:g}": v for k, v in ratios.items()}}


def scenario_theorem11(cfg: RunConfig, w: RunWriter):
    spec = cfg.spec
    T1 = spec.T1
    inner = spec.replace(target_time=T1, T1=T1 / 4)
    notes = []
    if "d0" in cfg.params:
        d0, d1 = cfg.param("d0", 0.0), cfg.param("d1", 0.0)
    else:
        run = blowup_run(inner, cfg, cfg.param("y_max", 1e8))
        d0, d1 = run["search"].d0, run["search"].d1
        notes += run["notes"]
    comp = composite_run(spec, _sine_data(spec), d0, d1, N=cfg.param("N", 32, int), M=cfg.param("M", 1e6),
                         y_max=cfg.param("y_max", 1e8))
    est = comp.estimate
    snaps = comp.trajectory
    step = max(len(snaps) // 100, 1)
    w.snapshots("fields.csv", snaps[::step] + ([snaps[-1]] if (len(snaps) - 1) % step else []))
    w.csv("rate.csv", ["p", "t", "max_abs_y", "t_est_minus_t"],
          [(spec.exponent, f.time, f.sup, est.t_est - f.time) for f in snaps if f.time > comp.switch_time])
    res = C.judge_two_phase(est.t_est, est.a_est, comp.phase1_ratio, spec)
    summary = {"d0": d0, "d1": d1, "phase1_ratio": comp.phase1_ratio, "switch_time": comp.switch_time,
               "reason": comp.reason, "notes": notes,
               "estimate": {"t_est": est.t_est, "a_est": est.a_est, "exponent": est.rate_exponent},
               "blowup": _spec_summary(spec)}
    return [res], summary


def _bump(x: np.ndarray, c: float, r: float) -> np.ndarray:
    u = np.clip(1 - ((x - c) / r) ** 2, 0.0, None)
    return u**2


def feedback_laws(spec: ProblemSpec, seed: int, gain: float = 20.0, t_end: float = 0.5):
    """The feedback-law family: (name, y0 values, controller)."""
    x = spec.x
    mask = spec.actuator_mask()
    p = spec.exponent
    rng = np.random.default_rng(seed)
    wl, wr = spec.actuator
    n_t, n_x = 50, 8
    table = rng.uniform(-gain, gain, size=(n_t, n_x))
    cell = np.clip(((x - wl) / (wr - wl) * n_x).astype(int), 0, n_x - 1)

    def random_gain(f: Field):
        k = min(int(f.time / t_end * n_t), n_t - 1)
        return table[k, cell] * f.values

    def pump(f: Field):
        # spatially constant source, growing in time
        return np.full_like(f.values, gain * (1 + 20 * f.time))

    return [
        ("phase2_inside", 40 * _bump(x, 0.3, 0.3), NonlinearFeedback(p, mask)),
        ("phase2_from_outside", 60 * _bump(x, 0.75, 0.25), NonlinearFeedback(p, mask)),
        ("phase2_two_bumps", 40 * _bump(x, -0.4, 0.2) + 30 * _bump(x, 0.75, 0.2), NonlinearFeedback(p, mask)),
        ("constant_gain", 5 * _bump(x, 0.0, 0.5), FunctionControl(lambda f: gain * f.values, gain)),
        ("random_bounded", 5 * _bump(x, 0.2, 0.5), FunctionControl(random_gain, gain)),
        ("adversarial_pump", 2 * _bump(x, 0.8, 0.15), FunctionControl(pump)),
    ]


def _interval(raw: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in raw.split(","))
    return lo, hi


def scenario_theorem12(cfg: RunConfig, w: RunWriter):
    spec = cfg.spec
    balls = Balls.from_intervals(_interval(cfg.params.get("b0", "0.75, 0.85")),
                                 _interval(cfg.params.get("b1", "0.7, 0.9")),
                                 _interval(cfg.params.get("b2", "0.65, 0.95")))
    balls.validate(spec)
    t_end = cfg.param("t_end", 0.5)
    y_max = cfg.param("y_max", 1e8)
    n_snap = cfg.param("snapshots", 200, int)
    runs, rows = [], []
    for name, v0, ctl in feedback_laws(spec, cfg.seed, cfg.param("gain", 20.0), t_end):
        v0[0] = v0[-1] = 0.0
        tr = integrate(spec, Field(v0, 0.0, spec.dx), ctl, StopRule(t_end=t_end, y_max=y_max),
                       snapshot_times=np.linspace(0, t_end, n_snap + 1)[1:])
        cert = localization_certificate(tr.snapshots, spec, balls, checkpoints=cfg.param("checkpoints", 20, int))
        reached = tr.reason == "Y_max"
        dist = argmax_distance_to_actuator(tr.final, spec)
        xm = float(spec.x[int(np.argmax(np.abs(tr.final.values)))])
        rec = {"law": name, "reason": tr.reason, "t_final": tr.final.time, "max_abs_y": tr.final.sup,
               "reached_y_max": reached, "argmax_x": xm, "argmax_distance": dist, "dx": spec.dx,
               "certificate": cert.passed, "max_sup_B0": max(cert.sup_B0), "max_bound": max(cert.bound),
               "max_sup_annulus": max(cert.sup_annulus)}
        runs.append(rec)
        rows.append([rec[k] for k in LOCALIZATION_HEADER])
        w.json(f"certificate_{name}.json", cert.to_dict())
    w.csv("localization.csv", LOCALIZATION_HEADER, rows)
    res = C.judge_localization(runs)
    return [res], {"runs": runs, "balls": [balls.center, balls.r0, balls.r1, balls.r2]}


LOCALIZATION_HEADER = ["law", "reason", "t_final", "max_abs_y", "reached_y_max", "argmax_x",
                       "argmax_distance", "certificate", "max_sup_B0", "max_bound", "max_sup_annulus"]


def scenario_solver(cfg: RunConfig, w: RunWriter):
    res, rows = C.check_solver()
    w.csv("convergence.csv", ["intervals", "dt", "sup_error"], rows)
    return [res], {}


SCENARIO_FUNCS: dict[str, Callable] = {
    "hermite": scenario_hermite,
    "kernel": scenario_kernel,
    "theorem21": scenario_theorem21,
    "rate": scenario_rate,
    "exit_modes": scenario_exit_modes,
    "degree": scenario_degree,
    "riccati": scenario_riccati,
    "null_control": scenario_null_control,
    "theorem11": scenario_theorem11,
    "theorem12": scenario_theorem12,
    "solver": scenario_solver,
}
assert set(SCENARIO_FUNCS) == set(SCENARIOS)


def run_scenario(cfg: RunConfig) -> RunOutcome:
    w = RunWriter(cfg.output)
    manifest = {"version": __version__, "status": "INCOMPLETE", "config": cfg.to_dict(),
                "criteria": list(SCENARIOS[cfg.kind])}
    w.json("manifest.json", manifest)
    crit = w.out / "criteria.json"
    if crit.exists():
        crit.unlink()
    try:
        with C.Timer() as tm:
            results, summary = SCENARIO_FUNCS[cfg.kind](cfg, w)
    except Exception as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["traceback"] = traceback.format_exc()
        w.json("manifest.json", manifest)
        raise
    block = {"criteria": [r.to_dict() for r in results], "all_pass": all(r.passed for r in results)}
    w.json("criteria.json", block)
    manifest.update(status="COMPLETE", runtime_s=tm.elapsed, summary=summary,
                    files=[f for f in w.files if f != "manifest.json"])
    w.json("manifest.json", manifest)
    return RunOutcome(w.out, results, summary)


def load_outcome(run_dir: str | Path) -> tuple[dict, list[dict]]:
    """Manifest and criteria block of a finished run; FileNotFoundError otherwise."""
    run_dir = Path(run_dir)
    man = run_dir / "manifest.json"
    if not man.is_file():
        raise FileNotFoundError(f"no manifest.json in {run_dir}")
    manifest = json.loads(man.read_text())
    crit = run_dir / "criteria.json"
    block = json.loads(crit.read_text())["criteria"] if crit.is_file() else []
    return manifest, block
