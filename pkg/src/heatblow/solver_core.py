"""Finite-difference solver for ``y_t = y_xx + chi_omega * u`` on an interval.

Dirichlet ends, uniform grid, implicit Euler for the diffusion and an explicit
or exact substep for the control. Step sizes shrink as ``max|y|`` grows so the
run can follow a solution into finite-time blowup.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import lapack


class SolverError(RuntimeError):
    """Raised when the integration produces non-finite values."""

    def __init__(self, message: str, snapshot: "Field | None" = None):
        super().__init__(message)
        self.snapshot = snapshot


class StepRejected(RuntimeError):
    """The exact nonlinear substep would cross the blowup time; shrink dt."""


class BlowupEstimateError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    omega_domain: tuple[float, float] = (-1.0, 1.0)
    actuator: tuple[float, float] = (-0.6, 0.6)
    target_point: float = 0.0
    target_time: float = 0.05
    exponent: float = 2.0
    eps0: float = 0.2
    K0: float = 1.5
    A_const: float = 20.0
    eta0: float = 0.5
    T1: float | None = None
    grid_points: int = 4097

    def __post_init__(self):
        xl, xr = self.omega_domain
        wl, wr = self.actuator
        if not xl < xr:
            raise ValueError("omega_domain must be a nonempty interval")
        if not (xl <= wl <= wr <= xr):
            raise ValueError("actuator must lie inside omega_domain")
        if self.target_time <= 0:
            raise ValueError("target_time must be positive")
        if self.exponent <= 1:
            raise ValueError("exponent must exceed 1")
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")
        if self.K0 < 1 or self.A_const < 1:
            raise ValueError("K0 and A_const must be >= 1")
        if not 0 < self.eta0 <= 1:
            raise ValueError("eta0 must lie in (0, 1]")
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")
        if not xl < self.target_point < xr:
            raise ValueError("target_point must lie inside omega_domain")
        T1 = self.target_time / 4 if self.T1 is None else self.T1
        if not 0 < T1 < self.target_time / 2:
            raise ValueError("T1 must lie in (0, T/2)")
        object.__setattr__(self, "T1", float(T1))

    @property
    def s0(self) -> float:
        return -math.log(self.target_time)

    @property
    def kappa(self) -> float:
        p = self.exponent
        return (p - 1) ** (-1 / (p - 1))

    @property
    def dx(self) -> float:
        xl, xr = self.omega_domain
        return (xr - xl) / (self.grid_points - 1)

    @property
    def x(self) -> np.ndarray:
        xl, xr = self.omega_domain
        return np.linspace(xl, xr, self.grid_points)

    def actuator_mask(self) -> np.ndarray:
        # grid nodes are cell centres of the node-centred cells
        x = self.x
        wl, wr = self.actuator
        return ((x > wl) & (x < wr)).astype(float)

    def construction_ok(self) -> bool:
        """True when ``(a - 2 eps0, a + 2 eps0)`` sits inside the actuator."""
        a, e = self.target_point, self.eps0
        wl, wr = self.actuator
        return wl <= a - 2 * e and a + 2 * e <= wr

    def replace(self, **changes) -> "ProblemSpec":
        d = asdict(self)
        if "target_time" in changes and "T1" not in changes:
            d["T1"] = None
        d.update(changes)
        d["omega_domain"] = tuple(d["omega_domain"])
        d["actuator"] = tuple(d["actuator"])
        return ProblemSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega_domain"] = list(self.omega_domain)
        d["actuator"] = list(self.actuator)
        return d


@dataclass
class Field:
    values: np.ndarray
    time: float
    dx: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def validate(self, y_max: float = math.inf) -> None:
        v = self.values
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("Dirichlet endpoints must be exactly zero")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        if np.max(np.abs(v)) >= y_max:
            raise ValueError("field exceeds the hard cap")

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.time, self.dx)


@dataclass
class BlowupEstimate:
    t_est: float
    a_est: float
    rate_exponent: float


# --------------------------------------------------------------------------
# controllers


class Controller:
    """Feedback map from a field to control values on the grid.

    ``max_dt`` lets stiff feedbacks (large gains) cap the step size.
    """

    def __call__(self, field: Field) -> np.ndarray:
        raise NotImplementedError

    def max_dt(self, field: Field) -> float:
        return math.inf


class ZeroControl(Controller):
    def __call__(self, field):
        return np.zeros_like(field.values)


class FunctionControl(Controller):
    """Wraps a plain callable ``f(field) -> ndarray``."""

    def __init__(self, fn: Callable[[Field], np.ndarray], max_gain: float = 0.0):
        self.fn = fn
        self.max_gain = max_gain

    def __call__(self, field):
        return np.asarray(self.fn(field), dtype=float)

    def max_dt(self, field):
        return 0.5 / self.max_gain if self.max_gain > 0 else math.inf


class NonlinearFeedback(Controller):
    """Phase-2 feedback ``u = |y|^{p-1} y`` with its exact ODE flow inside omega."""

    def __init__(self, p: float, mask: np.ndarray):
        self.p = p
        self.mask = np.asarray(mask, dtype=float)
        self._inside = self.mask > 0

    def __call__(self, field):
        y = field.values
        return np.abs(y) ** (self.p - 1) * y

    def flow(self, y: np.ndarray, dt: float) -> np.ndarray:
        p = self.p
        out = y.copy()
        yi = y[self._inside]
        denom = 1.0 - (p - 1) * np.abs(yi) ** (p - 1) * dt
        if np.any(denom <= 0):
            raise StepRejected("nonlinear flow crosses blowup within the step")
        out[self._inside] = yi * denom ** (-1.0 / (p - 1))
        return out


# --------------------------------------------------------------------------
# stepping


def diffuse(rhs: np.ndarray, dt: float, dx: float) -> np.ndarray:
    """Solve ``(I - dt D2) y = rhs`` with homogeneous Dirichlet ends."""
    n = rhs.size - 2
    out = np.zeros_like(rhs)
    if n <= 0:
        return out
    r = dt / dx**2
    off = np.full(n - 1, -r)
    diag = np.full(n, 1.0 + 2.0 * r)
    _, _, _, sol, info = lapack.dgtsv(off, diag, off.copy(), rhs[1:-1])
    if info != 0:
        raise SolverError(f"tridiagonal solve failed (info={info})")
    out[1:-1] = sol
    return out


def laplacian(values: np.ndarray, dx: float) -> np.ndarray:
    """Second-order central Laplacian, zero at the Dirichlet ends."""
    out = np.zeros_like(values)
    out[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / dx**2
    return out


def step(field: Field, dt: float, controller: Controller, mask: np.ndarray) -> Field:
    """Advance one step of size ``dt``.

    Controllers with an exact ``flow`` use Lie splitting (diffusion, then the
    flow restricted to omega). Other controllers are treated IMEX-Euler: the
    control enters the right-hand side of the implicit diffusion solve, so
    steady states of ``D2 y + chi u = 0`` are preserved exactly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = field.values
    if hasattr(controller, "flow"):
        y_new = controller.flow(diffuse(y, dt, field.dx), dt)
    else:
        u = controller(field)
        y_new = diffuse(y + dt * mask * u, dt, field.dx)
    y_new[0] = 0.0
    y_new[-1] = 0.0
    return Field(y_new, field.time + dt, field.dx)


# --------------------------------------------------------------------------
# integration


@dataclass
class StopRule:
    t_end: float = math.inf
    y_max: float = 1e8
    predicate: Callable[[Field], bool] | None = None


@dataclass
class Trajectory:
    snapshots: list[Field]
    reason: str
    steps: int = 0
    info: dict = dc_field(default_factory=dict)

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.snapshots])

    def sups(self) -> np.ndarray:
        return np.array([f.sup for f in self.snapshots])


def s_uniform_times(T: float, s_start: float, ds: float, s_end: float) -> np.ndarray:
    """Snapshot times ``t = T - exp(-s)`` on a uniform s grid."""
    n = int(math.floor((s_end - s_start) / ds + 1e-9))
    s = s_start + ds * np.arange(n + 1)
    return T - np.exp(-s)


def integrate(
    spec: ProblemSpec,
    y0: Field,
    controller: Controller,
    stop: StopRule,
    *,
    dt_base: float = 1e-4,
    rho: float = 0.01,
    snapshot_times: Sequence[float] | None = None,
    snapshot_every: float | None = None,
    on_snapshot: Callable[[Field], bool] | None = None,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Integrate until a stop rule fires.

    Snapshots land exactly on ``snapshot_times`` (or every ``snapshot_every``).
    ``on_snapshot`` returning True stops the run with reason "predicate"; this
    is how the shooting code stops at the first shrinking-set exit.
    """
    p = spec.exponent
    mask = spec.actuator_mask()
    f = y0.copy()
    f.values[0] = f.values[-1] = 0.0
    if not np.all(np.isfinite(f.values)):
        raise SolverError("initial data not finite", f)

    if snapshot_times is not None:
        sched = [t for t in np.asarray(snapshot_times, dtype=float) if t > f.time]
    else:
        sched = []
    every = snapshot_every
    next_every = f.time + every if every else math.inf

    snaps = [f.copy()]
    if on_snapshot is not None and on_snapshot(snaps[0]):
        return Trajectory(snaps, "predicate", 0)
    if stop.predicate is not None and stop.predicate(f):
        return Trajectory(snaps, "predicate", 0)

    steps = 0
    k = 0
    reason = "max_steps"
    while steps < max_steps:
        if f.time >= stop.t_end:
            reason = "t_end"
            break
        ymax = f.sup
        if ymax >= stop.y_max:
            reason = "Y_max"
            break
        dt = dt_base
        if ymax > 0:
            dt = min(dt, rho / ((p - 1) * ymax ** (p - 1)))
        dt = min(dt, controller.max_dt(f))
        target = min(stop.t_end, sched[k] if k < len(sched) else math.inf, next_every)
        land = False
        if f.time + dt >= target * (1 - 1e-15) or target - (f.time + dt) < 1e-3 * dt:
            dt = target - f.time
            land = True
        if dt <= 0:
            land = True
            new = f
        else:
            while True:
                try:
                    new = step(f, dt, controller, mask)
                    break
                except StepRejected:
                    dt *= 0.5
                    land = False
                    if dt < 1e-300:
                        raise SolverError("step size underflow", f)
            steps += 1
        if not np.all(np.isfinite(new.values)):
            raise SolverError(f"non-finite values at t={new.time!r}", f)
        f = new
        if land:
            f.time = target
            snap_due = False
            if k < len(sched) and target >= sched[k]:
                k += 1
                snap_due = True
            if target >= next_every:
                next_every += every
                snap_due = True
            if snap_due:
                snaps.append(f.copy())
                if on_snapshot is not None and on_snapshot(snaps[-1]):
                    reason = "predicate"
                    break
        if stop.predicate is not None and stop.predicate(f):
            reason = "predicate"
            break
    else:
        reason = "max_steps"
    if snaps[-1] is not f and snaps[-1].time != f.time:
        snaps.append(f.copy())
    return Trajectory(snaps, reason, steps)


# --------------------------------------------------------------------------
# blowup estimation


def _parabolic_argmax(x: np.ndarray, v: np.ndarray) -> float:
    i = int(np.argmax(v))
    if 0 < i < v.size - 1:
        y0, y1, y2 = v[i - 1], v[i], v[i + 1]
        den = y0 - 2 * y1 + y2
        if den != 0:
            off = 0.5 * (y0 - y2) / den
            return float(x[i] + off * (x[1] - x[0]))
    return float(x[i])


def estimate_blowup(
    snapshots: Sequence[Field], p: float, x: np.ndarray | None = None, tail: int | None = None
) -> BlowupEstimate:
    """Blowup time, point and rate exponent from the tail of a run.

    The time uses the flat ODE rate ``max|y| = ((p-1)(T-t))^{-1/(p-1)}``
    inverted at the last snapshot.
    """
    snaps = list(snapshots if tail is None else snapshots[-tail:])
    if len(snaps) < 10:
        raise BlowupEstimateError("need at least 10 snapshots")
    m = np.array([s.sup for s in snaps])
    if np.any(np.diff(m) <= 0):
        raise BlowupEstimateError("max|y| is non-monotone over the tail")
    t = np.array([s.time for s in snaps])
    last = snaps[-1]
    gap = 1.0 / ((p - 1) * m[-1] ** (p - 1))
    t_est = t[-1] + gap
    # time-to-go relative to the last snapshot keeps precision near blowup
    tau = (t[-1] - t) + gap
    slope = np.polyfit(np.log(tau), np.log(m), 1)[0]
    if x is None:
        x = np.arange(last.values.size) * last.dx
    a_est = _parabolic_argmax(np.asarray(x), np.abs(last.values))
    return BlowupEstimate(float(t_est), a_est, float(slope))


# --------------------------------------------------------------------------
# external formats


def write_snapshots_csv(path: str | Path, snapshots: Iterable[Field]) -> None:
    snaps = list(snapshots)
    n = snaps[0].values.size if snaps else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x_{i}" for i in range(n)])
        for s in snaps:
            w.writerow([f"{s.time:.17g}"] + [f"{v:.17g}" for v in s.values])


def read_snapshots_csv(path: str | Path, dx: float) -> list[Field]:
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            vals = np.array([float(v) for v in row[1:]])
            out.append(Field(vals, float(row[0]), dx))
    return out


def write_manifest(path: str | Path, spec: ProblemSpec, reason: str,
                   estimate: BlowupEstimate | None, extra: dict | None = None) -> None:
    doc = {
        "spec": spec.to_dict(),
        "termination": reason,
        "blowup_estimate": asdict(estimate) if estimate is not None else None,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))
