"""Similarity frame around a target blowup point.

With ``T - t = e^{-s}`` and ``x - a = e^{-s/2} z`` the state becomes
``W(z, s) = (T-t)^{1/(p-1)} y``. The cut-off state ``w = chi W`` is compared
against ``phi(z, s) = f(z / sqrt(s)) + kappa / (2 p s)`` and the remainder
``q = w - phi`` is split along the Hermite eigenfunctions of
``L = d_zz - (z/2) d_z + 1`` in ``L^2(mu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.interpolate import CubicSpline

from .solver_core import Field, ProblemSpec

GH_NODES = 128
_GH_U, _GH_W = hermgauss(GH_NODES)
# z = 2u turns the Gaussian measure into the Hermite weight e^{-u^2}/sqrt(pi)
GH_Z = 2.0 * _GH_U
GH_W = _GH_W / math.sqrt(math.pi)


class QuadratureError(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


def kappa(p: float) -> float:
    return (p - 1) ** (-1 / (p - 1))


def profile_f(eta, p: float):
    eta = np.asarray(eta, dtype=float)
    out = (p - 1 + (p - 1) ** 2 * eta**2 / (4 * p)) ** (-1 / (p - 1))
    return out if out.ndim else float(out)


def phi(z, s: float, p: float):
    return profile_f(np.asarray(z) / math.sqrt(s), p) + kappa(p) / (2 * p * s)


def _g(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def cutoff_chi0(xi):
    """Smooth even cutoff: 1 on ``|xi| <= 1``, 0 on ``|xi| >= 2``."""
    a = np.abs(np.asarray(xi, dtype=float))
    g_in = _g(2.0 - a)
    g_out = _g(a - 1.0)
    out = np.where(a <= 1.0, 1.0, np.where(a >= 2.0, 0.0, g_in / np.where(a >= 2.0, 1.0, g_in + g_out)))
    return out if out.ndim else float(out)


def chi(z, s: float, eps0: float):
    return cutoff_chi0(np.asarray(z) * math.exp(-s / 2) / eps0)


def chi1(z, s: float, K0: float):
    return cutoff_chi0(np.abs(np.asarray(z)) / (K0 * math.sqrt(s)))


def hermite_h(m: int, z):
    """``h_m(z) = sum_n m!/(n!(m-2n)!) (-1)^n z^{m-2n}``."""
    if not 0 <= m <= 10:
        raise ValueError("hermite_h supports 0 <= m <= 10")
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for n in range(m // 2 + 1):
        c = math.factorial(m) / (math.factorial(n) * math.factorial(m - 2 * n)) * (-1) ** n
        out = out + c * z ** (m - 2 * n)
    return out if out.ndim else float(out)


def hermite_norm2(m: int) -> float:
    return float(2**m * math.factorial(m))


def herm_k(m: int, z):
    return hermite_h(m, z) / hermite_norm2(m)


def measure_mu(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-(z**2) / 4) / math.sqrt(4 * math.pi)
    return out if out.ndim else float(out)


def mu_integral(g: Callable[[np.ndarray], np.ndarray]) -> float:
    """``int g dmu`` by 128-node Gauss-Hermite quadrature."""
    return float(np.dot(GH_W, g(GH_Z)))


@dataclass
class SimilaritySlice:
    s: float
    z_grid: np.ndarray
    W: np.ndarray
    w: np.ndarray
    q: np.ndarray
    p: float
    q_eval: Callable[[np.ndarray], np.ndarray]
    qe_outer_sup: float = 0.0
    t: float = math.nan

    @classmethod
    def from_function(cls, s: float, q_fn: Callable[[np.ndarray], np.ndarray], p: float = 2.0,
                      z_half: float = 40.0, points_per_unit: int = 32) -> "SimilaritySlice":
        """Synthetic slice with a prescribed remainder, for tests and oracles."""
        n = 2 * int(z_half * points_per_unit) + 1
        z = np.linspace(-z_half, z_half, n)
        q = np.asarray(q_fn(z), dtype=float)
        ph = phi(z, s, p)
        return cls(s, z, q + ph, q + ph, q, p, lambda zz: np.asarray(q_fn(zz), dtype=float))


def to_similarity(field: Field, spec: ProblemSpec, T: float | None = None, *,
                  points_per_unit: int | None = None, margin: float = 1.1,
                  x: np.ndarray | None = None) -> SimilaritySlice:
    """Rescale a field around the target point.

    The z grid spans ``|z| <= 4 K0 sqrt(s) * margin``. By default its spacing
    follows the x grid mapped to z, between 32 and 512 points per unit. ``W`` is a cubic spline
    of ``y`` on ``|x - a| < 2 eps0``; outside that window ``w = 0`` and the
    remainder is ``-phi``. Beyond the z grid the outer remainder is sampled
    directly on the x grid, giving ``qe_outer_sup``.
    """
    T = spec.target_time if T is None else T
    p = spec.exponent
    a = spec.target_point
    if not field.time < T:
        raise ValueError("field time must be before T")
    tau = T - field.time
    s = -math.log(tau)
    scale = math.sqrt(tau)
    amp = tau ** (1 / (p - 1))
    xl, xr = spec.omega_domain
    win = 2 * spec.eps0
    if a - win < xl or a + win > xr:
        raise ConfigurationError("similarity window (a - 2 eps0, a + 2 eps0) leaves the domain")
    if x is None:
        x = xl + field.dx * np.arange(field.values.size)
    z_half = 4.0 * spec.K0 * math.sqrt(s) * margin
    if points_per_unit is None:
        points_per_unit = int(min(max(math.ceil(scale / field.dx), 32), 512))
    n = 2 * int(math.ceil(z_half * points_per_unit)) + 1
    z = np.linspace(-z_half, z_half, n)

    lo = max(int(np.searchsorted(x, a - win)) - 3, 0)
    hi = min(int(np.searchsorted(x, a + win)) + 3, x.size)
    spl = CubicSpline(x[lo:hi], field.values[lo:hi])

    def w_of(zz):
        zz = np.asarray(zz, dtype=float)
        xx = a + scale * zz
        inside = np.abs(xx - a) < win
        out = np.zeros_like(zz)
        if np.any(inside):
            out[inside] = amp * spl(xx[inside]) * chi(zz[inside], s, spec.eps0)
        return out

    def q_of(zz):
        return w_of(zz) - phi(zz, s, p)

    xz = a + scale * z
    W = np.zeros_like(z)
    inside = np.abs(xz - a) < win
    W[inside] = amp * spl(xz[inside])
    w = w_of(z)
    q = w - phi(z, s, p)

    # outer remainder beyond the z grid, on x-grid points
    zx = (x - a) / scale
    far = np.abs(zx) > z_half
    qe_outer = 0.0
    if np.any(far):
        zf = zx[far]
        wf = amp * field.values[far] * chi(zf, s, spec.eps0)
        qf = (wf - phi(zf, s, p)) * (1 - chi1(zf, s, spec.K0))
        qe_outer = float(np.max(np.abs(qf)))
    return SimilaritySlice(s, z, W, w, q, p, q_of, qe_outer, field.time)


@dataclass
class SpectralDecomp:
    q0: float
    q1: float
    q2: float
    q_minus: np.ndarray
    q_e: np.ndarray
    s: float
    z_grid: np.ndarray
    quad_error: float = 0.0
    qe_sup: float = 0.0

    @property
    def qminus_weighted(self) -> float:
        return float(np.max(np.abs(self.q_minus) / (1 + np.abs(self.z_grid) ** 3)))

    def csv_row(self) -> list[float]:
        return [self.s, self.q0, self.q1, self.q2, self.qminus_weighted, self.qe_sup]


DECOMP_CSV_HEADER = ["s", "q0", "q1", "q2", "norm_qminus_weighted", "sup_qe"]


def _project(z: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Coefficients of ``qb`` on ``h0, h1, h2`` under the trapezoid ``mu`` inner product.

    The discrete Gram matrix is inverted so the residual is exactly orthogonal
    on the grid.
    """
    wts = measure_mu(z) * (z[1] - z[0])
    wts[0] *= 0.5
    wts[-1] *= 0.5
    H = np.stack([hermite_h(m, z) for m in range(3)])
    G = (H * wts) @ H.T
    rhs = (H * wts) @ qb
    return np.linalg.solve(G, rhs)


def decompose(sl: SimilaritySlice, K0: float, rel_tol: float | None = 1e-6) -> SpectralDecomp:
    """Project ``chi1 q`` onto ``h0, h1, h2``; the rest is ``q_minus`` and ``q_e``.

    Trapezoid quadrature on the slice grid (spectrally accurate for smooth,
    Gaussian-weighted integrands). The error estimate compares against the
    same rule on every other grid point; ``rel_tol=None`` skips the check.
    """
    s = sl.s
    z = sl.z_grid
    need = min(2.2 * K0 * math.sqrt(s), 40.0)
    if z[-1] < need or z[0] > -need:
        raise QuadratureError("z grid does not cover the chi1 support")
    c1 = chi1(z, s, K0)
    qb = c1 * sl.q
    coef = _project(z, qb)
    coarse = _project(z[::2], qb[::2]) if z.size % 2 == 1 else coef
    qnorm = float(np.max(np.abs(sl.q))) if sl.q.size else 0.0
    err = float(np.max(np.abs(coef - coarse) * [hermite_norm2(m) for m in range(3)]))
    if rel_tol is not None and err > rel_tol * qnorm and err > 1e-14:
        raise QuadratureError(f"quadrature error {err:.3e} exceeds {rel_tol:g} * |q|")
    coef = [float(c) for c in coef]
    q_minus = qb - sum(c * hermite_h(m, z) for m, c in enumerate(coef))
    q_e = (1 - c1) * sl.q
    qe_sup = max(float(np.max(np.abs(q_e))), sl.qe_outer_sup)
    return SpectralDecomp(coef[0], coef[1], coef[2], q_minus, q_e, s, z, err, qe_sup)
