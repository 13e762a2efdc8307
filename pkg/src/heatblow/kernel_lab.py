"""Mehler kernel of ``L = d_zz - (z/2) d_z + 1`` and checks of its semigroup.

``e^{theta L}(z, x)`` is ``e^theta`` times the Gaussian density in ``x`` with
mean ``z e^{-theta/2}`` and variance ``2(1 - e^{-theta})``. Integrals against
it use composite Gauss-Legendre panels over 12 standard deviations, with an
optional extra panel edge at ``x = 0`` so that ``|x|^m`` weights keep full
accuracy.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .similarity import hermite_h

N_SIGMA = 12.0
_PANELS = 24
_GL_X, _GL_W = leggauss(12)


class KernelDomainError(ValueError):
    pass


class TailTruncationWarning(UserWarning):
    pass


def _check_theta(theta: float) -> None:
    if not theta >= 1e-12:
        raise KernelDomainError("theta must be >= 1e-12; the kernel degenerates to a point mass")


def kernel_moments(theta: float) -> tuple[float, float]:
    """Shift factor ``e^{-theta/2}`` and standard deviation of the Gaussian factor."""
    return math.exp(-theta / 2), math.sqrt(2 * (1 - math.exp(-theta)))


def mehler_kernel(theta: float, z, x):
    _check_theta(theta)
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    v = 1 - math.exp(-theta)
    out = math.exp(theta) / math.sqrt(4 * math.pi * v) * np.exp(-((z * math.exp(-theta / 2) - x) ** 2) / (4 * v))
    return out if out.ndim else float(out)


# Gauss-Legendre panels on [-N_SIGMA, N_SIGMA] in standardized units
_EDGES = np.linspace(-N_SIGMA, N_SIGMA, _PANELS + 1)


def _std_nodes(split: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Standardized nodes/weights, one row per evaluation point.

    ``split`` inserts one extra panel edge per row (clipped to the window, so
    an outside break gives a zero-width panel with zero weights).
    """
    if split is None:
        edges = _EDGES[None, :]
    else:
        extra = np.clip(split, -N_SIGMA, N_SIGMA)[:, None]
        edges = np.sort(np.concatenate([np.broadcast_to(_EDGES, (extra.shape[0], _EDGES.size)), extra], axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    u = (mid[..., None] + half[..., None] * _GL_X).reshape(edges.shape[0], -1)
    w = (half[..., None] * _GL_W).reshape(edges.shape[0], -1)
    return u, w


def semigroup(theta: float, g: Callable[[np.ndarray], np.ndarray],
              kink: bool = False) -> Callable[[np.ndarray], np.ndarray]:
    """``e^{theta L} g`` as a callable, for composition.

    ``kink=True`` adds a panel edge at ``x = 0`` for integrands like ``|x|^m``.
    """
    _check_theta(theta)
    shift, sd = kernel_moments(theta)
    base = None if kink else _std_nodes()

    def apply(z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        c = z * shift
        u, w = _std_nodes(-c / sd) if kink else base
        x = c[:, None] + sd * u
        dens = w * np.exp(-0.5 * u**2) / math.sqrt(2 * math.pi)
        gx = np.asarray(g(x.ravel()), dtype=float).reshape(x.shape)
        return math.exp(theta) * np.sum(dens * gx, axis=1)

    return apply


def apply_semigroup(theta: float, g, z, x_grid: np.ndarray | None = None,
                    kink: bool = False) -> np.ndarray:
    """Apply ``e^{theta L}`` to ``g`` and evaluate at ``z``.

    ``g`` is either a callable or samples on ``x_grid``; samples are
    interpolated by a cubic spline and a warning is raised when the grid does
    not cover the kernel's 12-sigma window for some ``z``.
    """
    if callable(g):
        return semigroup(theta, g, kink)(z)
    if x_grid is None:
        raise ValueError("sampled g needs its x_grid")
    vals = np.asarray(g, dtype=float)
    spl = CubicSpline(x_grid, vals)
    shift, sd = kernel_moments(theta)
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    lo = float(np.min(zz)) * shift - N_SIGMA * sd
    hi = float(np.max(zz)) * shift + N_SIGMA * sd
    if lo < x_grid[0] or hi > x_grid[-1]:
        # mass of the kernel outside the grid, relative
        miss = 0.5 * math.erfc((x_grid[-1] - float(np.max(zz)) * shift) / (sd * math.sqrt(2)))
        miss += 0.5 * math.erfc((float(np.min(zz)) * shift - x_grid[0]) / (sd * math.sqrt(2)))
        if miss > 1e-8:
            warnings.warn(f"kernel tail outside the sample grid: {miss:.2e}", TailTruncationWarning)

    def g_fn(x):
        out = np.zeros_like(x)
        inside = (x >= x_grid[0]) & (x <= x_grid[-1])
        out[inside] = spl(x[inside])
        return out

    return semigroup(theta, g_fn, kink)(zz)


def eigen_error(theta: float, m: int, z: np.ndarray) -> float:
    """Weighted sup error of ``e^{theta L} h_m = e^{(1 - m/2) theta} h_m``."""
    got = apply_semigroup(theta, lambda x: hermite_h(m, x), z)
    want = math.exp((1 - m / 2) * theta) * hermite_h(m, z)
    return float(np.max(np.abs(got - want) / (1 + np.abs(z) ** m)))


def composition_error(theta1: float, theta2: float, m: int, z: np.ndarray) -> float:
    """Relative error of ``e^{theta1 L} e^{theta2 L} h_m`` against ``e^{(theta1+theta2) L} h_m``."""
    g = lambda x: hermite_h(m, x)
    two = semigroup(theta1, semigroup(theta2, g))(z)
    one = semigroup(theta1 + theta2, g)(z)
    return float(np.max(np.abs(two - one)) / max(float(np.max(np.abs(one))), 1e-300))


def moment_bound_check(theta: float, m: int, z) -> float:
    """``max_z int e^{theta L}(z, x)(1 + |x|^m) dx / (e^theta (1 + |z|^m))``."""
    if not 0 < theta <= 5:
        raise ValueError("theta must lie in (0, 5]")
    if not 0 <= m <= 6:
        raise ValueError("m must lie in [0, 6]")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if m == 0:
        return 1.0
    got = apply_semigroup(theta, lambda x: 1 + np.abs(x) ** m, z, kink=True)
    return float(np.max(got / (math.exp(theta) * (1 + np.abs(z) ** m))))


def moment_ratios(theta: float, m: int, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    got = apply_semigroup(theta, lambda x: 1 + np.abs(x) ** m, z, kink=True)
    return got / (math.exp(theta) * (1 + np.abs(z) ** m))
