"""Two-parameter initial data concentrated at the target point, and the
admissible parameter rectangle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .similarity import chi, chi1, mu_integral, phi
from .solver_core import Field, ProblemSpec


class SupportError(ValueError):
    pass


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class InitialDataParams:
    d0: float
    d1: float
    spec: ProblemSpec


@dataclass
class InitialDataReport:
    flags: list[str] = field(default_factory=list)
    support_radius: float = 0.0


def y0_profile(x: np.ndarray, d0: float, d1: float, spec: ProblemSpec) -> np.ndarray:
    """``T^{-1/(p-1)} (phi chi(8z) + (A/s0^2)(d0 + d1 z) chi1(2z))`` with ``z = (x-a)/sqrt(T)``."""
    T = spec.target_time
    p = spec.exponent
    s0 = spec.s0
    z = (np.asarray(x, dtype=float) - spec.target_point) / math.sqrt(T)
    base = phi(z, s0, p) * chi(8 * z, s0, spec.eps0)
    pert = spec.A_const / s0**2 * (d0 + d1 * z) * chi1(2 * z, s0, spec.K0)
    return T ** (-1 / (p - 1)) * (base + pert)


def build_y0(params: InitialDataParams, *, with_report: bool = False):
    spec = params.spec
    x = spec.x
    vals = y0_profile(x, params.d0, params.d1, spec)
    vals[0] = vals[-1] = 0.0
    rep = InitialDataReport()
    s0 = spec.s0
    if not spec.K0 * math.sqrt(s0) < spec.eps0 * math.exp(s0 / 2):
        rep.flags.append("s0_small: K0 sqrt(s0) >= eps0 e^{s0/2}")
    rep.support_radius = _support_radius(spec)
    if rep.support_radius > spec.eps0 / 4:
        rep.flags.append("support_exceeds_eps0_over_4")
    wl, wr = spec.actuator
    a = spec.target_point
    if a - rep.support_radius <= wl or a + rep.support_radius >= wr:
        raise SupportError("initial data support leaves the actuator window; reduce eps0 or K0")
    f = Field(vals, 0.0, spec.dx)
    return (f, rep) if with_report else f


def _support_radius(spec: ProblemSpec) -> float:
    # chi(8z) vanishes for |x-a| >= eps0/4, chi1(2z) for |z| >= K0 sqrt(s0)
    rT = math.sqrt(spec.target_time)
    return max(spec.eps0 / 4, spec.K0 * math.sqrt(spec.s0) * rT)


def basis_fields(spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``y0(d0, d1) = g00 + d0 g0 + d1 g1`` exactly."""
    x = spec.x
    g00 = y0_profile(x, 0.0, 0.0, spec)
    g0 = y0_profile(x, 1.0, 0.0, spec) - g00
    g1 = y0_profile(x, 0.0, 1.0, spec) - g00
    for g in (g00, g0, g1):
        g[0] = g[-1] = 0.0
    return g00, g0, g1


def b_coefficients(s0: float, K0: float) -> tuple[float, float]:
    b0 = mu_integral(lambda z: chi1(2 * z, s0, K0))
    b1 = mu_integral(lambda z: chi1(2 * z, s0, K0) * z**2 / 2)
    return b0, b1


@dataclass(frozen=True)
class Rectangle:
    d0_half: float
    d1_half: float
    d0_center: float = 0.0
    d1_center: float = 0.0
    b0: float = math.nan
    b1: float = math.nan
    flags: tuple[str, ...] = ()

    @property
    def bounds(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.d0_center - self.d0_half, self.d0_center + self.d0_half),
                (self.d1_center - self.d1_half, self.d1_center + self.d1_half))

    @property
    def diameter(self) -> float:
        return 2 * math.hypot(self.d0_half, self.d1_half)


def admissible_rect(spec: ProblemSpec, strict: bool = True) -> Rectangle:
    """``[-1/b0, 1/b0] x [-1/b1, 1/b1]``.

    With ``strict=False`` a rectangle is returned even when ``b0`` or ``b1`` is
    at most 1/2; it is clipped to ``[-2, 2]^2`` and flagged.
    """
    b0, b1 = b_coefficients(spec.s0, spec.K0)
    flags = []
    if b0 <= 0.5 or b1 <= 0.5:
        if strict:
            raise AdmissibilityError(f"s0 too small: b0={b0:.6g}, b1={b1:.6g}")
        flags.append("b_below_half")
    h0, h1 = 1 / b0, 1 / b1
    if h0 > 2 or h1 > 2:
        flags.append("clipped_to_2")
        h0, h1 = min(h0, 2.0), min(h1, 2.0)
    return Rectangle(h0, h1, 0.0, 0.0, b0, b1, tuple(flags))


def regime_checks(spec: ProblemSpec) -> dict[str, bool]:
    """Which of the initial-data inequalities hold at this s0."""
    s0 = spec.s0
    b0, b1 = b_coefficients(s0, spec.K0)
    return {
        "b0_above_half": b0 > 0.5,
        "b1_above_half": b1 > 0.5,
        "cutoff_separation": spec.K0 * math.sqrt(s0) < spec.eps0 * math.exp(s0 / 2),
        "support_within_eps0_over_4": _support_radius(spec) <= spec.eps0 / 4,
        "support_within_actuator": spec.construction_ok(),
    }
