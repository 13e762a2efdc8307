"""Acceptance checks shared by the scenarios, the CLI and the test suite.

Each check returns a :class:`CriterionResult`; the expensive simulations are
done by the scenarios, which hand their products to the ``judge_*`` helpers.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..kernel_lab import composition_error, eigen_error, moment_ratios
from ..lq_control import GalerkinSystem, galerkin_closed_loop, solve_riccati_backward
from ..shrinking_set import SQUARE
from ..similarity import hermite_h, hermite_norm2, mu_integral, profile_f
from ..solver_core import Field, ProblemSpec, StopRule, ZeroControl, integrate

NAMES = {
    1: "hermite structure",
    2: "mehler eigenrelations",
    3: "moment bound",
    4: "profile convergence",
    5: "blowup rate",
    6: "exit-mode classification",
    7: "boundary degree",
    8: "riccati scalar oracle",
    9: "null control",
    10: "two-phase end to end",
    11: "no blowup away from the actuator",
    12: "solver verification",
}


@dataclass
class CriterionResult:
    number: int
    passed: bool
    measured: dict = field(default_factory=dict)
    threshold: str = ""
    runtime: float = 0.0

    @property
    def name(self) -> str:
        return NAMES[self.number]

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items() if not isinstance(v, (list, dict)))
        return f"criterion {self.number:2d} [{tag}] {self.name}: {brief} (need {self.threshold})"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["name"] = self.name
        d["status"] = "PASS" if self.passed else "FAIL"
        return d


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False


# --------------------------------------------------------------------------
# cheap, self-contained checks


def check_hermite(n_max: int = 6) -> CriterionResult:
    with Timer() as tm:
        err = 0.0
        for n in range(n_max + 1):
            for m in range(n_max + 1):
                got = mu_integral(lambda z: hermite_h(n, z) * hermite_h(m, z))
                want = hermite_norm2(n) if n == m else 0.0
                err = max(err, abs(got - want))
    ok = err <= 1e-10 and tm.elapsed < 1.0
    return CriterionResult(1, ok, {"max_error": err, "runtime_s": tm.elapsed},
                           "error <= 1e-10, runtime < 1 s", tm.elapsed)


KERNEL_THETAS = (0.1, 0.5, 1.0, 2.0)
COMPOSITION_PAIRS = ((0.1, 0.4), (0.5, 0.5), (1.0, 1.0), (0.3, 1.7))


def check_mehler(z: np.ndarray | None = None) -> CriterionResult:
    z = np.linspace(-10, 10, 201) if z is None else z
    zc = np.linspace(-6, 6, 25)
    with Timer() as tm:
        eig = max(eigen_error(th, m, z) for th in KERNEL_THETAS for m in range(5))
        comp = max(composition_error(a, b, m, zc) for a, b in COMPOSITION_PAIRS for m in range(5))
    ok = eig <= 1e-8 and comp <= 1e-7 and tm.elapsed < 5.0
    return CriterionResult(2, ok, {"eigen_error": eig, "composition_error": comp, "runtime_s": tm.elapsed},
                           "eigen <= 1e-8, composition <= 1e-7, runtime < 5 s", tm.elapsed)


MOMENT_THETAS = (0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)


def moment_table(z: np.ndarray | None = None) -> list[tuple[int, float, float, float]]:
    """Rows ``(m, theta, max ratio, argmax z)`` over the configured grid."""
    z = np.linspace(-10, 10, 2001) if z is None else z
    rows = []
    for m in range(1, 5):
        for th in MOMENT_THETAS:
            r = moment_ratios(th, m, z)
            i = int(np.argmax(r))
            rows.append((m, th, float(r[i]), float(z[i])))
    return rows


def check_moment(z: np.ndarray | None = None) -> tuple[CriterionResult, list]:
    with Timer() as tm:
        rows = moment_table(z)
    worst = max(rows, key=lambda r: r[2])
    finite = all(math.isfinite(r[2]) for r in rows)
    ok = finite and worst[2] <= 10.0 and tm.elapsed < 10.0
    res = CriterionResult(3, ok, {"max_ratio": worst[2], "at_m": worst[0], "at_theta": worst[1],
                                  "at_z": worst[3], "runtime_s": tm.elapsed},
                          "ratio finite and <= 10, runtime < 10 s", tm.elapsed)
    return res, rows


def scalar_riccati_oracle(a: float = 1.0, tau: float = 1.0, M: float = 1e8, checkpoints: int = 10):
    """Scalar ``z' = a z + v`` against ``p(t) = 2a / (1 - e^{-2a(tau - t)})``.

    Returns (table rows, max relative error of P, max relative error of z).
    """
    sys1 = GalerkinSystem(1, np.array([-a]), np.array([[1.0]]))
    ric = solve_riccati_backward(sys1, tau, M)
    ts = tau * np.arange(checkpoints) / checkpoints
    loop = galerkin_closed_loop(sys1, ric, np.array([1.0]), np.append(ts, tau))
    rows = []
    ep = ez = 0.0
    for k, t in enumerate(ts):
        want = 2 * a / (1 - math.exp(-2 * a * (tau - t)))
        got = float(ric(t)[0, 0])
        zw = math.sinh(a * (tau - t)) / math.sinh(a * tau)
        zg = float(loop.z[k, 0])
        ep = max(ep, abs(got - want) / want)
        ez = max(ez, abs(zg - zw) / abs(zw))
        rows.append((t, got, want, zg, zw))
    return rows, ep, ez, loop


def check_riccati_scalar(a: float = 1.0, tau: float = 1.0, M: float = 1e8) -> tuple[CriterionResult, list]:
    with Timer() as tm:
        rows, ep, ez, _ = scalar_riccati_oracle(a, tau, M)
    ok = ep <= 1e-4 and ez <= 1e-4 and tm.elapsed < 1.0
    res = CriterionResult(8, ok, {"p_rel_error": ep, "z_rel_error": ez, "runtime_s": tm.elapsed},
                          "relative error <= 1e-4 at 10 checkpoints, runtime < 1 s", tm.elapsed)
    return res, rows


def heat_error(n_intervals: int, dt: float, t_end: float = 0.1) -> float:
    """Sup error against ``e^{-pi^2 t} sin(pi x)`` on (0, 1)."""
    spec = ProblemSpec(omega_domain=(0.0, 1.0), actuator=(0.4, 0.6), target_point=0.5,
                       grid_points=n_intervals + 1)
    x = spec.x
    y0 = Field(np.sin(math.pi * x), 0.0, spec.dx)
    tr = integrate(spec, y0, ZeroControl(), StopRule(t_end=t_end, y_max=math.inf), dt_base=dt)
    exact = math.exp(-math.pi**2 * t_end) * np.sin(math.pi * x)
    return float(np.max(np.abs(tr.final.values - exact)))


def check_solver() -> tuple[CriterionResult, list]:
    with Timer() as tm:
        err = heat_error(512, 1e-5)
        # parabolic refinement: dx -> dx/2 with dt -> dt/4
        levels = [(32, 1e-3), (64, 2.5e-4), (128, 6.25e-5)]
        errs = [heat_error(n, dt) for n, dt in levels]
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    ok = err <= 1e-4 and min(orders) >= 1.8 and tm.elapsed < 10.0
    rows = [(n, dt, e) for (n, dt), e in zip(levels, errs)]
    res = CriterionResult(12, ok, {"sup_error_512": err, "min_order": min(orders), "orders": orders,
                                   "runtime_s": tm.elapsed},
                          "sup error <= 1e-4, order >= 1.8, runtime < 10 s", tm.elapsed)
    return res, rows


# --------------------------------------------------------------------------
# judges for the simulation-backed criteria


def profile_error(f: Field, spec: ProblemSpec, T: float | None = None, n_xi: int = 401) -> float:
    """``sup_{|xi|<=1} |(T-t)^{1/(p-1)} y(a + xi sqrt((T-t)|log(T-t)|), t) - f(xi)|``."""
    T = spec.target_time if T is None else T
    p = spec.exponent
    tau = T - f.time
    xi = np.linspace(-1, 1, n_xi)
    xx = spec.target_point + xi * math.sqrt(tau * abs(math.log(tau)))
    x = spec.omega_domain[0] + f.dx * np.arange(f.values.size)
    v = tau ** (1 / (p - 1)) * np.interp(xx, x, f.values)
    return float(np.max(np.abs(v - profile_f(xi, p))))


def judge_profile(errors: dict[float, float], success: bool) -> CriterionResult:
    e2, e6 = errors.get(1e-2, math.nan), errors.get(1e-6, math.nan)
    ok = success and e6 <= 0.15 and e6 < e2
    return CriterionResult(4, bool(ok), {"search_success": success, "E(1e-2)": e2, "E(1e-6)": e6},
                           "E(1e-6) <= 0.15 and E(1e-6) < E(1e-2)")


def judge_rate(fits: Sequence[dict], dx: float) -> CriterionResult:
    ok = True
    meas = {}
    for fit in fits:
        p = fit["p"]
        want = -1 / (p - 1)
        rel = abs(fit["exponent"] - want) / abs(want)
        da = abs(fit["a_est"] - fit["a"])
        ok &= rel <= 0.05 and da <= 3 * dx and fit["success"]
        tag = f"p{p:g}"
        meas[f"{tag}_exponent"] = fit["exponent"]
        meas[f"{tag}_rel_dev"] = rel
        meas[f"{tag}_a_err"] = da
    return CriterionResult(5, bool(ok), meas, "exponent within 5% of -1/(p-1), |a_est - a| <= 3dx")


def judge_exit_modes(constraints: Sequence[str]) -> CriterionResult:
    square = {c.value for c in SQUARE}
    bad = [c for c in constraints if c not in square]
    counts: dict[str, int] = {}
    for c in constraints:
        counts[c] = counts.get(c, 0) + 1
    ok = len(constraints) >= 100 and not bad
    return CriterionResult(6, ok, {"exits": len(constraints), "non_square": len(bad), "counts": counts},
                           ">= 100 exits, all through Q0 or Q1")


def judge_degree(winding: int, samples: int) -> CriterionResult:
    return CriterionResult(7, winding == 1, {"winding": winding, "samples": samples}, "winding = 1")


def judge_null_control(ratios: dict[float, float], M: float, runtime: float) -> CriterionResult:
    Ms = sorted(ratios)
    mono = all(ratios[Ms[i + 1]] < ratios[Ms[i]] for i in range(len(Ms) - 1))
    ok = ratios[M] <= 1e-3 and mono and runtime < 30.0
    meas = {f"ratio_M{m:.0e}": r for m, r in ratios.items()}
    meas.update(monotone=mono, runtime_s=runtime)
    return CriterionResult(9, ok, meas, "ratio <= 1e-3 at M, smaller at 10M, runtime < 30 s", runtime)


def judge_two_phase(t_est: float, a_est: float, ratio: float, spec: ProblemSpec) -> CriterionResult:
    T, a = spec.target_time, spec.target_point
    ok = abs(t_est - T) <= 0.02 * T and abs(a_est - a) <= 3 * spec.dx and ratio <= 1e-3
    return CriterionResult(10, bool(ok), {"t_est": t_est, "t_rel_err": abs(t_est - T) / T,
                                          "a_err": abs(a_est - a), "phase1_ratio": ratio},
                           "|t_est - T| <= 0.02T, |a_est - a| <= 3dx, ratio <= 1e-3")


def judge_localization(runs: Sequence[dict]) -> CriterionResult:
    ok = True
    blown = 0
    for r in runs:
        if r["reached_y_max"]:
            blown += 1
            ok &= r["argmax_distance"] <= 2 * r["dx"]
        ok &= r["certificate"]
    return CriterionResult(11, bool(ok), {"runs": len(runs), "blowups": blown,
                                          "max_argmax_distance": max((r["argmax_distance"] for r in runs if r["reached_y_max"]), default=0.0),
                                          "certificates_passed": sum(bool(r["certificate"]) for r in runs)},
                           "argmax within 2dx of the actuator on every blowup, certificate PASS on all runs")
