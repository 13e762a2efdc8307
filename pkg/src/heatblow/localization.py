"""Why blowup cannot be isolated away from the actuator.

For nested intervals ``B0 ⊂ B1 ⊂ B2`` clear of ``closure(omega)``, the product
``phi = chi2 y`` with a cutoff ``chi2`` (1 on B0, 0 off B1) sees no control and
solves ``phi_t - phi_xx = -2 (chi2' y)_x + chi2'' y`` on the whole line. The
Duhamel formula then bounds ``y`` on ``B0`` by values of ``y`` on the annulus
``B1 \\ B0`` alone.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import Sequence

import numpy as np
from scipy.special import erfc

from .similarity import cutoff_chi0
from .solver_core import Field, ProblemSpec


class BallConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Balls:
    """Concentric intervals around ``center`` with radii ``r0 < r1 < r2``."""

    center: float
    r0: float
    r1: float
    r2: float

    @classmethod
    def from_intervals(cls, b0: tuple[float, float], b1: tuple[float, float],
                       b2: tuple[float, float]) -> "Balls":
        c = 0.5 * (b0[0] + b0[1])
        for b in (b1, b2):
            if abs(0.5 * (b[0] + b[1]) - c) > 1e-12:
                raise BallConfigurationError("balls must be concentric")
        return cls(c, 0.5 * (b0[1] - b0[0]), 0.5 * (b1[1] - b1[0]), 0.5 * (b2[1] - b2[0]))

    def validate(self, spec: ProblemSpec) -> None:
        if not 0 < self.r0 < self.r1 < self.r2:
            raise BallConfigurationError("need 0 < r0 < r1 < r2")
        xl, xr = spec.omega_domain
        if self.center - self.r2 <= xl or self.center + self.r2 >= xr:
            raise BallConfigurationError("B2 must lie inside the domain")
        wl, wr = spec.actuator
        if self.center + self.r2 >= wl and self.center - self.r2 <= wr:
            raise BallConfigurationError("B2 intersects the closed actuator window")

    def chi2(self, x: np.ndarray) -> np.ndarray:
        d = np.abs(np.asarray(x) - self.center)
        return cutoff_chi0(1.0 + (d - self.r0) / (self.r1 - self.r0))


def _cutoff_derivatives(balls: Balls, x: np.ndarray, dx: float):
    c = balls.chi2(x)
    d1 = np.gradient(c, dx)
    d2 = np.gradient(d1, dx)
    return c, d1, d2


def _int_G(tau, x):
    """``int_0^tau G(s, x) ds`` for the 1-D heat kernel."""
    tau = np.asarray(tau, dtype=float)
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(tau / math.pi) * np.exp(-(x**2) / (4 * tau)) - 0.5 * ax * erfc(ax / (2 * np.sqrt(tau)))
    return np.where(tau > 0, out, 0.0)


def _int_Gx(tau, x):
    """``int_0^tau d_x G(s, x) ds``."""
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -0.5 * erfc(x / (2 * np.sqrt(tau)))
    lim = np.where(x > 0, 0.0, np.where(x < 0, -1.0, -0.5))
    return np.where(tau > 0, out - lim, 0.0)


def heat_kernel(t: float, x):
    return np.exp(-np.asarray(x) ** 2 / (4 * t)) / math.sqrt(4 * math.pi * t)


@dataclass
class CertificateReport:
    times: list[float]
    sup_B0: list[float]
    sup_annulus: list[float]
    bound: list[float]
    duhamel_sup: list[float]
    passed: bool
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def localization_certificate(trajectory: Sequence[Field], spec: ProblemSpec, balls: Balls,
                             checkpoints: int = 20, x: np.ndarray | None = None) -> CertificateReport:
    """Check ``sup_B0 |y(t)| <= C1(t)`` where ``C1`` uses only annulus data.

    ``C1(t) = |chi2 y0|_inf + int_0^t (2|chi2' y|_inf / sqrt(pi (t-s)) + |chi2'' y|_inf) ds``
    with the singular kernel integrated exactly on each snapshot interval and
    the larger endpoint value held over the interval. The Duhamel formula
    itself is also evaluated on ``B0`` by direct convolution on the grid and
    reported as ``duhamel_sup``.
    """
    balls.validate(spec)
    snaps = list(trajectory)
    if x is None:
        x = spec.omega_domain[0] + snaps[0].dx * np.arange(snaps[0].values.size)
    dx = snaps[0].dx
    d = np.abs(x - balls.center)
    in0 = d < balls.r0
    ann = (d >= balls.r0) & (d < balls.r2)
    src = (d >= balls.r0 - 2 * dx) & (d <= balls.r1 + 2 * dx)
    c, c1, c2 = _cutoff_derivatives(balls, x, dx)
    t = np.array([f.time for f in snaps])
    Y = np.array([f.values for f in snaps])
    f1 = c1[None, :] * Y
    f2 = c2[None, :] * Y
    n1 = np.max(np.abs(f1), axis=1)
    n2 = np.max(np.abs(f2), axis=1)
    phi0 = c * Y[0]
    n0 = float(np.max(np.abs(phi0)))

    idx = np.unique(np.linspace(0, len(snaps) - 1, min(checkpoints, len(snaps))).round().astype(int))
    times, sB0, sAnn, bnd, duh = [], [], [], [], []
    xs = x[in0]
    xsrc = x[src]
    supp0 = np.abs(phi0) > 0
    for k in idx:
        tk = t[k]
        b = n0
        val = np.zeros(xs.size)
        if tk > t[0]:
            # free evolution of phi0
            val = dx * heat_kernel(tk - t[0], xs[:, None] - x[supp0][None, :]) @ phi0[supp0]
        for i in range(k):
            a_, b_ = tk - t[i], tk - t[i + 1]
            h1 = max(n1[i], n1[i + 1])
            h2 = max(n2[i], n2[i + 1])
            b += 2 * h1 * 2 * (math.sqrt(a_) - math.sqrt(b_)) / math.sqrt(math.pi) + h2 * (a_ - b_)
            g1 = 0.5 * (f1[i] + f1[i + 1])[src]
            g2 = 0.5 * (f2[i] + f2[i + 1])[src]
            r = xs[:, None] - xsrc[None, :]
            kx = _int_Gx(a_, r) - _int_Gx(b_, r)
            k0 = _int_G(a_, r) - _int_G(b_, r)
            val += dx * (-2 * kx @ g1 + k0 @ g2)
        times.append(float(tk))
        sB0.append(float(np.max(np.abs(Y[k][in0]))))
        sAnn.append(float(np.max(np.abs(Y[k][ann]))))
        bnd.append(float(b))
        duh.append(float(np.max(np.abs(val))) if tk > t[0] else float(np.max(np.abs(phi0[in0]))))
    ok = all(math.isfinite(bb) and s <= bb * (1 + 1e-9) + 1e-12 for s, bb in zip(sB0, bnd))
    return CertificateReport(times, sB0, sAnn, bnd, duh, ok)


def parabolic_T1_bound(eps: float, eps0: float, sigma1: float, C5: float, p: float = 2.0) -> float:
    """``min{1, (eps/2 / (C5 e^{(sigma1+1)^{p-1}} (sigma1+1)(1/eps0 + 1/eps0^2)))^2}``."""
    if min(eps, eps0, sigma1, C5) <= 0:
        raise ValueError("all arguments must be positive")
    den = C5 * math.exp((sigma1 + 1) ** (p - 1)) * (sigma1 + 1) * (1 / eps0 + 1 / eps0**2)
    return min(1.0, (eps / 2 / den) ** 2)


def argmax_distance_to_actuator(field: Field, spec: ProblemSpec) -> float:
    """Distance from the argmax of ``|y|`` to the closed actuator window (0 inside)."""
    x = spec.omega_domain[0] + field.dx * np.arange(field.values.size)
    xm = float(x[int(np.argmax(np.abs(field.values)))])
    wl, wr = spec.actuator
    return max(wl - xm, xm - wr, 0.0)
