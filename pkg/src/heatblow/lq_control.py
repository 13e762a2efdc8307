"""Phase-1 steering by Riccati feedback on a sine-Galerkin model.

The linear part ``z' = A z + B v`` is projected on the first N Dirichlet sine
modes of the domain. The backward Riccati equation with terminal penalty
``P(tau) = M I`` gives the feedback ``v = -B^T P(t) z`` that drives ``y - y~0``
to (nearly) zero at ``tau = T - T1``. The composite controller then switches to
the nonlinear feedback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .initial_data import InitialDataParams, build_y0
from .solver_core import (BlowupEstimate, Controller, Field, NonlinearFeedback, ProblemSpec,
                          StopRule, Trajectory, estimate_blowup, integrate, laplacian)


class RiccatiError(RuntimeError):
    def __init__(self, message: str, t_fail: float):
        super().__init__(message)
        self.t_fail = t_fail


class NullControlFailed(RuntimeError):
    def __init__(self, message: str, ratio: float):
        super().__init__(message)
        self.ratio = ratio


@dataclass
class GalerkinSystem:
    n_modes: int
    eigvals: np.ndarray
    B_mat: np.ndarray
    domain: tuple[float, float] = (0.0, 1.0)

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1) * math.pi / self.length

    def basis(self, x: np.ndarray) -> np.ndarray:
        """``e_k(x_i)``, shape (N, len(x))."""
        xi = np.asarray(x) - self.domain[0]
        return math.sqrt(2 / self.length) * np.sin(np.outer(self.freqs, xi))

    def project(self, values: np.ndarray, dx: float) -> np.ndarray:
        """Exact sine coefficients of the piecewise-linear interpolant of grid values."""
        xi = np.arange(values.size) * dx
        w = self.freqs
        hat = dx * np.sinc(w * dx / (2 * math.pi)) ** 2
        return math.sqrt(2 / self.length) * hat * (np.sin(np.outer(w, xi)) @ values)


def _sine_product_integral(j: int, k: int, L: float, a: float, b: float) -> float:
    """``(2/L) int_a^b sin(j pi x/L) sin(k pi x/L) dx`` in closed form."""
    c = math.pi / L
    if j == k:
        F = lambda x: x - math.sin(2 * k * c * x) / (2 * k * c)
    else:
        F = lambda x: (math.sin((j - k) * c * x) / ((j - k) * c)
                       - math.sin((j + k) * c * x) / ((j + k) * c))
    return (F(b) - F(a)) / L


def assemble_galerkin(spec: ProblemSpec, N: int) -> GalerkinSystem:
    if N < 1:
        raise ValueError("N must be >= 1")
    xl, xr = spec.omega_domain
    L = xr - xl
    a, b = spec.actuator[0] - xl, spec.actuator[1] - xl
    B = np.empty((N, N))
    for j in range(1, N + 1):
        for k in range(j, N + 1):
            B[j - 1, k - 1] = B[k - 1, j - 1] = _sine_product_integral(j, k, L, a, b)
    lam = (np.arange(1, N + 1) * math.pi / L) ** 2
    return GalerkinSystem(N, lam, B, (xl, xr))


# --------------------------------------------------------------------------
# Riccati


@dataclass
class RiccatiSolution:
    time_grid: np.ndarray
    P: np.ndarray
    dP: np.ndarray
    M: float

    def __call__(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolation of ``P`` at ``t``."""
        tg = self.time_grid
        if t <= tg[0]:
            return self.P[0].copy()
        if t >= tg[-1]:
            return self.P[-1].copy()
        i = int(np.searchsorted(tg, t)) - 1
        h = tg[i + 1] - tg[i]
        u = (t - tg[i]) / h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        out = h00 * self.P[i] + h10 * h * self.dP[i] + h01 * self.P[i + 1] + h11 * h * self.dP[i + 1]
        return 0.5 * (out + out.T)

    def spectrum(self) -> np.ndarray:
        return np.array([np.linalg.eigvalsh(p) for p in self.P])


def _rhs(P: np.ndarray, A: np.ndarray, BB: np.ndarray) -> np.ndarray:
    return P @ BB @ P - A.T @ P - P @ A


def solve_riccati_backward(sys: GalerkinSystem, tau: float, M: float, *, rtol: float = 1e-9,
                           atol: float = 1e-12, h0: float | None = None,
                           h_min: float = 1e-16) -> RiccatiSolution:
    """Integrate ``P' = P B B^T P - A^T P - P A`` from ``P(tau) = M I`` down to 0.

    Classical RK4 with step doubling for the error estimate; the step halves
    on rejection and grows by up to 2x on acceptance. ``P`` is symmetrised
    after every step.
    """
    if M < 0 or tau <= 0:
        raise ValueError("need M >= 0 and tau > 0")
    N = sys.n_modes
    A = -np.diag(sys.eigvals)
    BB = sys.B_mat @ sys.B_mat.T
    P = M * np.eye(N)
    t = tau
    lam_max = float(np.max(np.abs(sys.eigvals))) if N else 0.0
    if h0 is None:
        h0 = 0.1 / (2 * lam_max + 2 * M * float(np.linalg.norm(BB, 2)) + 1e-300)
    h = min(h0, tau)
    ts, Ps, dPs = [t], [P.copy()], [_rhs(P, A, BB)]

    def rk4(P, h):
        # backward in time: step of -h
        k1 = _rhs(P, A, BB)
        k2 = _rhs(P - 0.5 * h * k1, A, BB)
        k3 = _rhs(P - 0.5 * h * k2, A, BB)
        k4 = _rhs(P - h * k3, A, BB)
        out = P - h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return 0.5 * (out + out.T)

    while t > 0:
        h = min(h, t)
        big = rk4(P, h)
        half = rk4(rk4(P, h / 2), h / 2)
        err = float(np.max(np.abs(big - half)))
        scale = atol + rtol * float(np.max(np.abs(half)))
        if not np.all(np.isfinite(half)) or err > scale:
            h *= 0.5
            if h < h_min:
                raise RiccatiError(f"step underflow at t={t:.6g}", t)
            continue
        P = half + (half - big) / 15.0
        P = 0.5 * (P + P.T)
        t = t - h if t - h > 1e-15 * tau else 0.0
        ts.append(t)
        Ps.append(P.copy())
        dPs.append(_rhs(P, A, BB))
        fac = 2.0 if err < scale / 32 else 1.0
        h *= fac
    return RiccatiSolution(np.array(ts[::-1]), np.array(Ps[::-1]), np.array(dPs[::-1]), M)


def loewner_monotone(ric: RiccatiSolution, rel_tol: float = 1e-8) -> bool:
    """True when ``P`` is nondecreasing in t (it falls from ``M I`` going backward)."""
    for a, b in zip(ric.P[:-1], ric.P[1:]):
        lo = float(np.min(np.linalg.eigvalsh(b - a)))
        if lo < -rel_tol * max(float(np.linalg.norm(b, 2)), 1.0):
            return False
    return True


# --------------------------------------------------------------------------
# feedback


class SupportOutsideActuator(ValueError):
    pass


class LQFeedback(Controller):
    """``u = -B^T P(t)(y - y~0) - Lap y~0`` reconstructed on the grid.

    The time is taken from the field relative to ``t_offset``.
    """

    def __init__(self, ric: RiccatiSolution, sys: GalerkinSystem, spec: ProblemSpec,
                 y_tilde0: np.ndarray | None = None, t_offset: float = 0.0):
        self.ric = ric
        self.sys = sys
        self.spec = spec
        self.x = spec.x
        self.dx = spec.dx
        self.E = sys.basis(self.x)
        yt = np.zeros_like(self.x) if y_tilde0 is None else np.asarray(y_tilde0, dtype=float)
        mask = spec.actuator_mask()
        if np.any((np.abs(yt) > 0) & (mask == 0)):
            raise SupportOutsideActuator("y~0 must be supported inside the actuator window")
        self.y_tilde0 = yt
        self.lap = laplacian(yt, self.dx)
        self.t_offset = t_offset

    def coefficients(self, y: np.ndarray, t: float) -> np.ndarray:
        c = self.sys.project(y - self.y_tilde0, self.dx)
        return -self.sys.B_mat.T @ (self.ric(t) @ c)

    def __call__(self, field: Field) -> np.ndarray:
        t = field.time - self.t_offset
        v = self.coefficients(field.values, t)
        return v @ self.E - self.lap

    def max_dt(self, field: Field) -> float:
        P = self.ric(field.time - self.t_offset)
        g = float(np.linalg.norm(self.sys.B_mat @ P @ self.sys.B_mat.T, 2))
        return 0.5 / g if g > 0 else math.inf


def lq_feedback(ric: RiccatiSolution, sys: GalerkinSystem, y: Field, y_tilde0: Field | None,
                t: float, spec: ProblemSpec) -> np.ndarray:
    ctl = LQFeedback(ric, sys, spec, None if y_tilde0 is None else y_tilde0.values)
    return ctl(Field(y.values, t, y.dx))


# --------------------------------------------------------------------------
# closed loops


@dataclass
class GalerkinLoop:
    times: np.ndarray
    z: np.ndarray
    v: np.ndarray
    quad_form: np.ndarray
    energy: float


def galerkin_closed_loop(sys: GalerkinSystem, ric: RiccatiSolution, z0: np.ndarray,
                         times: np.ndarray, rtol: float = 1e-11) -> GalerkinLoop:
    """``z' = (A - B B^T P(t)) z`` on the Galerkin model, with the control energy.

    Integrated with an implicit Radau scheme since the gain reaches ``M`` at the
    horizon; the running energy ``int |v|^2`` is carried as an extra state.
    """
    A = -np.diag(sys.eigvals)
    B = sys.B_mat
    n = sys.n_modes

    def rhs(t, u):
        z = u[:n]
        v = -B.T @ (ric(t) @ z)
        return np.concatenate([A @ z + B @ v, [v @ v]])

    u0 = np.concatenate([np.asarray(z0, dtype=float), [0.0]])
    sol = solve_ivp(rhs, (float(times[0]), float(times[-1])), u0, method="Radau", t_eval=times,
                    rtol=rtol, atol=1e-14 * max(float(np.max(np.abs(z0))), 1.0))
    if not sol.success:
        raise RiccatiError(f"closed-loop integration failed: {sol.message}", float(sol.t[-1]))
    z = sol.y[:n].T
    v = np.array([-B.T @ (ric(t) @ zi) for t, zi in zip(sol.t, z)])
    qf = np.array([zi @ ric(t) @ zi for t, zi in zip(sol.t, z)])
    return GalerkinLoop(sol.t, z, v, qf, float(sol.y[n, -1]))


@dataclass
class NullControlResult:
    ratio: float
    terminal_norm: float
    initial_norm: float
    trajectory: Trajectory
    quad_form: np.ndarray


def l2_norm(values: np.ndarray, dx: float) -> float:
    return float(math.sqrt(dx * np.sum(values**2)))


def null_control_run(spec: ProblemSpec, y0: Field, tau: float, *, N: int = 32, M: float = 1e6,
                     y_tilde0: np.ndarray | None = None, dt_base: float = 1e-4,
                     n_snap: int = 50, ric: RiccatiSolution | None = None,
                     sys: GalerkinSystem | None = None) -> NullControlResult:
    """Closed-loop phase 1 on ``[0, tau]`` steering ``y`` toward ``y~0``."""
    sys = sys or assemble_galerkin(spec, N)
    ric = ric or solve_riccati_backward(sys, tau, M)
    ctl = LQFeedback(ric, sys, spec, y_tilde0)
    times = np.linspace(0, tau, n_snap + 1)[1:]
    tr = integrate(spec, y0, ctl, StopRule(t_end=tau, y_max=math.inf), dt_base=dt_base,
                   snapshot_times=times)
    yt = ctl.y_tilde0
    n0 = l2_norm(y0.values - yt, spec.dx)
    n1 = l2_norm(tr.final.values - yt, spec.dx)
    qf = []
    for f in tr.snapshots:
        c = sys.project(f.values - yt, spec.dx)
        qf.append(float(c @ ric(f.time) @ c))
    ratio = n1 / n0 if n0 > 0 else (0.0 if n1 == 0 else math.inf)
    return NullControlResult(ratio, n1, n0, tr, np.array(qf))


@dataclass
class CompositeResult:
    trajectory: list[Field]
    phase1_ratio: float
    phase1_drift: float
    estimate: BlowupEstimate
    switch_time: float
    reason: str


def composite_run(spec: ProblemSpec, y0: Field, d0: float, d1: float, *, N: int = 32,
                  M: float = 1e6, null_tol: float = 1e-3, y_max: float = 1e8,
                  ds: float = 0.02, dt_base: float = 1e-4) -> CompositeResult:
    """Two-phase run: Riccati steering to ``y~0`` on ``[0, T - T1)``, then the
    nonlinear feedback, which blows up at ``T``.

    ``y~0`` is the initial datum of the blowup construction with target time
    ``T1`` and parameters ``(d0, d1)``.
    """
    T = spec.target_time
    T1 = spec.T1
    if not 0 < T1 < T / 2:
        raise ValueError("T1 must lie in (0, T/2)")
    tau = T - T1
    inner = spec.replace(target_time=T1, T1=T1 / 4)
    yt = build_y0(InitialDataParams(d0, d1, inner)).values
    nc = null_control_run(spec, y0, tau, N=N, M=M, y_tilde0=yt, dt_base=dt_base)
    if nc.initial_norm > 0 and nc.ratio > null_tol:
        raise NullControlFailed(f"phase-1 ratio {nc.ratio:.3e} exceeds {null_tol:g}", nc.ratio)
    drift = nc.terminal_norm
    start = nc.trajectory.final.copy()
    start.time = tau
    fb = NonlinearFeedback(spec.exponent, spec.actuator_mask())
    p = spec.exponent
    kap = (p - 1) ** (-1 / (p - 1))
    s_end = min((p - 1) * math.log(y_max / kap) + 1.0, -math.log(T1 * 1e-13))
    times = T - np.exp(-np.arange(-math.log(T1), s_end, ds))
    tr2 = integrate(spec, start, fb, StopRule(y_max=y_max, t_end=float(times[-1])),
                    dt_base=dt_base, snapshot_times=times[1:])
    est = estimate_blowup(tr2.snapshots[-50:], p, spec.x)
    merged = list(nc.trajectory.snapshots) + list(tr2.snapshots[1:])
    return CompositeResult(merged, nc.ratio, drift, est, tau, tr2.reason)
