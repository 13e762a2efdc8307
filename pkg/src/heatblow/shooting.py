"""Shooting in the initial-data parameters ``(d0, d1)``.

A shot integrates the phase-2 closed loop from ``y0(d0, d1)`` and watches the
shrinking set on an s-uniform snapshot grid. The rescaled flow ``Phi`` is read
off where ``(q0, q1)`` first leaves its square; the full-set exit is recorded
alongside it.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Sequence

import numpy as np

from .initial_data import InitialDataParams, Rectangle, admissible_rect, basis_fields
from .shrinking_set import (ExitConstraint, ExitEvent, MembershipMonitor, classify,
                            first_exit_from_history, phi_of)
from .solver_core import (Field, NonlinearFeedback, ProblemSpec, StopRule, Trajectory,
                          integrate, s_uniform_times)


class ShotStatus(str, enum.Enum):
    SUCCESS = "SUCCESS"
    EXIT = "EXIT"


class NoSignChange(RuntimeError):
    def __init__(self, message: str, samples: list):
        super().__init__(message)
        self.samples = samples


class DegreeUndefined(RuntimeError):
    pass


@dataclass(frozen=True)
class ShotConfig:
    y_max: float = 1e8
    ds: float = 0.02
    dt_base: float = 1e-4
    rho: float = 0.01
    ds_tol: float = 1e-3
    refine: bool = True
    keep_trajectory: bool = False


@dataclass
class ShotResult:
    d0: float
    d1: float
    status: ShotStatus
    # event defining Phi: the first square exit, or the terminal violation
    # when the cap is reached with an inner constraint broken
    phi_exit: ExitEvent | None
    full_exit: ExitEvent | None
    s_end: float
    reason: str
    trajectory: Trajectory | None = None
    margin_history: list = dc_field(default_factory=list, repr=False)

    @property
    def phi(self) -> tuple[float, float] | None:
        return self.phi_exit.phi_value if self.phi_exit else None

    @property
    def s_star(self) -> float:
        return self.phi_exit.s_star if self.phi_exit else self.s_end

    def csv_row(self) -> list:
        ev = self.phi_exit
        return [self.d0, self.d1, self.s_star,
                ev.exit_constraint.value if ev else self.status.value,
                ev.phi_value[0] if ev else math.nan, ev.phi_value[1] if ev else math.nan]


# every constraint but the outer-region bound, which no desk-scale run keeps
CORE_FAMILIES = ("q0", "q1", "q2", "qminus", "qe")

SHOT_CSV_HEADER = ["d0", "d1", "s_star", "exit_constraint", "phi_x", "phi_y"]

_basis_cache: dict = {}


def _y0(d0: float, d1: float, spec: ProblemSpec) -> Field:
    key = spec
    if key not in _basis_cache:
        _basis_cache.clear()
        _basis_cache[key] = basis_fields(spec)
    g00, g0, g1 = _basis_cache[key]
    return Field(g00 + d0 * g0 + d1 * g1, 0.0, spec.dx)


def s_end_for(spec: ProblemSpec, cfg: ShotConfig) -> float:
    """Last snapshot s: beyond ``Y_max`` in the flat rate, capped by time resolution."""
    p = spec.exponent
    kap = (p - 1) ** (-1 / (p - 1))
    s_y = (p - 1) * math.log(cfg.y_max / kap) + 1.0
    s_fp = -math.log(spec.target_time * 1e-13)
    return min(s_y, s_fp)


def shoot(d0: float, d1: float, spec: ProblemSpec, cfg: ShotConfig = ShotConfig()) -> ShotResult:
    T = spec.target_time
    fb = NonlinearFeedback(spec.exponent, spec.actuator_mask())
    y0 = _y0(d0, d1, spec)
    times = s_uniform_times(T, spec.s0, cfg.ds, s_end_for(spec, cfg))
    mon = MembershipMonitor(spec, families=("q0", "q1"))
    tr = integrate(spec, y0, fb, StopRule(t_end=float(times[-1]), y_max=cfg.y_max),
                   dt_base=cfg.dt_base, rho=cfg.rho, snapshot_times=times, on_snapshot=mon)
    if tr.reason == "Y_max" and tr.final.time < T:
        # the cap can be hit between snapshots (early blowup); judge the final state too
        if not mon.history or mon.history[-1][0].time < tr.final.time:
            mon(tr.final)

    def advance(f: Field, t: float) -> Field:
        return integrate(spec, f, fb, StopRule(t_end=t, y_max=math.inf),
                         dt_base=cfg.dt_base, rho=cfg.rho).final

    adv = advance if cfg.refine else None
    hist = mon.history
    sq = first_exit_from_history(hist, spec, families=("q0", "q1"), advance=adv, ds_tol=cfg.ds_tol)
    full = first_exit_from_history(hist, spec, advance=adv, ds_tol=cfg.ds_tol) if mon.first_full is not None else None
    if sq is None and hist:
        # cap reached with the square intact: success only if the inner
        # constraints hold too (an off-centre early blowup breaks QE)
        f_last, m_last = hist[-1]
        c = classify(m_last, CORE_FAMILIES)
        if c is not None:
            sq = ExitEvent(m_last.s, f_last.time, c, phi_of(m_last, spec.A_const), m_last)
    status = ShotStatus.EXIT if sq is not None else ShotStatus.SUCCESS
    s_end = hist[-1][1].s if hist else spec.s0
    return ShotResult(d0, d1, status, sq, full, s_end, tr.reason,
                      tr if cfg.keep_trajectory else None,
                      [m for _, m in hist] if cfg.keep_trajectory else [])


def _shoot_star(args):
    d0, d1, spec, cfg = args
    return shoot(d0, d1, spec, cfg)


def shoot_many(params: Iterable[tuple[float, float]], spec: ProblemSpec,
               cfg: ShotConfig = ShotConfig(), workers: int = 1) -> list[ShotResult]:
    """Independent shots; results come back in input order."""
    jobs = [(float(a), float(b), spec, cfg) for a, b in params]
    if workers <= 1:
        return [_shoot_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_shoot_star, jobs))


# --------------------------------------------------------------------------
# search


@dataclass(frozen=True)
class SearchConfig:
    tol: float = 1e-10
    max_outer: int = 60
    max_inner: int = 60
    landscape: int = 3
    rect: Rectangle | None = None


@dataclass
class SearchResult:
    d0: float
    d1: float
    best: ShotResult
    window: tuple[tuple[float, float], tuple[float, float]]
    path: list[tuple[float, float, float, str]]
    landscape: list[ShotResult]
    shots: int

    @property
    def success(self) -> bool:
        return self.best.status is ShotStatus.SUCCESS


def _sign(r: ShotResult, k: int) -> int:
    if r.status is ShotStatus.SUCCESS:
        return 0
    v = r.phi_exit.phi_value[k]
    return 1 if v > 0 else -1 if v < 0 else 0


def _is_q1(r: ShotResult) -> bool:
    return r.phi_exit is not None and r.phi_exit.exit_constraint in (
        ExitConstraint.Q1_PLUS, ExitConstraint.Q1_MINUS)


def _better(a: ShotResult | None, b: ShotResult) -> bool:
    if a is None:
        return True
    if (b.status is ShotStatus.SUCCESS) != (a.status is ShotStatus.SUCCESS):
        return b.status is ShotStatus.SUCCESS
    if b.s_star != a.s_star:
        return b.s_star > a.s_star
    return (b.d0, b.d1) < (a.d0, a.d1)


def find_blowup_params(spec: ProblemSpec, cfg: SearchConfig = SearchConfig(),
                       shot_cfg: ShotConfig = ShotConfig()) -> SearchResult:
    """Nested bisection on the signs of ``Phi``.

    The inner loop bisects ``d0`` on ``sign(Phi_0)`` for fixed ``d1`` until the
    exit leaves through a ``q1`` face (or a shot succeeds). The outer loop then
    bisects ``d1`` on ``sign(Phi_1)`` at that point.
    """
    rect = cfg.rect or admissible_rect(spec)
    (lo0, hi0), (lo1, hi1) = rect.bounds
    if not (hi0 > lo0 and hi1 > lo1):
        raise ValueError("degenerate search rectangle")
    shots = 0
    path: list = []
    best: ShotResult | None = None

    def run(d0, d1):
        nonlocal shots, best
        r = shoot(d0, d1, spec, shot_cfg)
        shots += 1
        if _better(best, r):
            best = r
        tag = r.phi_exit.exit_constraint.value if r.phi_exit else r.status.value
        path.append((d0, d1, r.s_star, tag))
        return r

    def inner(d1):
        """Returns the last shot and the final d0 window for this d1."""
        a, b = lo0, hi0
        ra, rb = run(a, d1), run(b, d1)
        sa, sb = _sign(ra, 0), _sign(rb, 0)
        if sa == 0:
            return ra, (a, a)
        if sb == 0:
            return rb, (b, b)
        if sa == sb:
            raise NoSignChange(f"Phi_0 has the same sign at both d0 ends (d1={d1:g})",
                               [(a, d1, ra.phi), (b, d1, rb.phi)])
        mid_r = None
        for _ in range(cfg.max_inner):
            m = 0.5 * (a + b)
            mid_r = run(m, d1)
            sm = _sign(mid_r, 0)
            if mid_r.status is ShotStatus.SUCCESS:
                return mid_r, (a, b)
            if sm == sa:
                a = m
            else:
                b = m
            if _is_q1(mid_r):
                return mid_r, (a, b)
            if b - a <= cfg.tol:
                break
        return mid_r, (a, b)

    a1, b1 = lo1, hi1
    ra, _ = inner(a1)
    rb, _ = inner(b1)
    sa, sb = _sign(ra, 1), _sign(rb, 1)
    window0 = (lo0, hi0)
    result_r = None
    if sa == 0:
        result_r = ra
    elif sb == 0:
        result_r = rb
    elif sa == sb:
        raise NoSignChange("Phi_1 has the same sign at both d1 ends",
                           [(ra.d0, a1, ra.phi), (rb.d0, b1, rb.phi)])
    if result_r is None:
        for _ in range(cfg.max_outer):
            m = 0.5 * (a1 + b1)
            rm, window0 = inner(m)
            sm = _sign(rm, 1)
            if rm.status is ShotStatus.SUCCESS or not _is_q1(rm):
                # d0 resolved to tolerance before any q1 exit: d1 is as good
                # as the d0 precision can show
                result_r = rm
                a1 = b1 = m
                break
            if sm == sa:
                a1 = m
            else:
                b1 = m
            result_r = rm
            if b1 - a1 <= cfg.tol and window0[1] - window0[0] <= cfg.tol:
                break
    assert best is not None
    d0s, d1s = best.d0, best.d1
    window = (window0, (a1, b1))
    land = []
    n = cfg.landscape
    if n >= 2:
        h0 = max(window0[1] - window0[0], cfg.tol)
        h1 = max(b1 - a1, cfg.tol)
        for i in range(n):
            for j in range(n):
                u = d0s + h0 * (i / (n - 1) - 0.5)
                v = d1s + h1 * (j / (n - 1) - 0.5)
                land.append(shoot(u, v, spec, shot_cfg))
    return SearchResult(d0s, d1s, best, window, path, land, shots)


# --------------------------------------------------------------------------
# degree


def winding_number(values: Sequence[tuple[float, float]]) -> int:
    """Winding of a closed polygon of nonzero 2-vectors about the origin."""
    v = np.asarray(values, dtype=float)
    ang = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(float(np.sum(d)) / (2 * np.pi)))


def boundary_points(rect: Rectangle, samples: int) -> list[tuple[float, float]]:
    """Counter-clockwise samples on the rectangle boundary, corners included."""
    if samples < 8:
        raise ValueError("need at least 8 boundary samples")
    (l0, h0), (l1, h1) = rect.bounds
    per = max(samples // 4, 2)
    pts = []
    for k in range(per):
        pts.append((l0 + (h0 - l0) * k / per, l1))
    for k in range(per):
        pts.append((h0, l1 + (h1 - l1) * k / per))
    for k in range(per):
        pts.append((h0 - (h0 - l0) * k / per, h1))
    for k in range(per):
        pts.append((l0, h1 - (h1 - l1) * k / per))
    return pts


@dataclass
class DegreeResult:
    winding: int
    points: list[tuple[float, float]]
    shots: list[ShotResult]


def boundary_degree(spec: ProblemSpec, samples: int, rect: Rectangle | None = None,
                    shot_cfg: ShotConfig = ShotConfig(), workers: int = 1) -> DegreeResult:
    rect = rect or admissible_rect(spec)
    pts = boundary_points(rect, samples)
    res = shoot_many(pts, spec, shot_cfg, workers)
    if any(r.status is ShotStatus.SUCCESS for r in res):
        raise DegreeUndefined("a boundary sample did not exit")
    return DegreeResult(winding_number([r.phi for r in res]), pts, res)
