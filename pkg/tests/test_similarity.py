from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatblow.similarity import (ConfigurationError, SimilaritySlice, chi1, cutoff_chi0, decompose, hermite_h,
                                 hermite_norm2, kappa, mu_integral, phi, profile_f, to_similarity)
from heatblow.solver_core import Field, ProblemSpec


def test_profile_values():
    assert profile_f(0.0, 2.0) == 1.0
    assert profile_f(0.0, 3.0) == pytest.approx(kappa(3.0))
    # f(1) for p = 2: 1 / (1 + 1/8)
    assert profile_f(1.0, 2.0) == pytest.approx(8 / 9)
    assert phi(0.0, 10.0, 2.0) == pytest.approx(1 + 1 / 40)


@given(st.floats(-5, 5))
def test_cutoff_even_and_bounded(xi):
    v = cutoff_chi0(xi)
    assert v == cutoff_chi0(-xi)
    assert 0.0 <= v <= 1.0
    if abs(xi) <= 1:
        assert v == 1.0
    if abs(xi) >= 2:
        assert v == 0.0


def test_cutoff_monotone_on_transition():
    xi = np.linspace(1, 2, 101)
    assert np.all(np.diff(cutoff_chi0(xi)) <= 0)
    assert cutoff_chi0(1.5) == pytest.approx(0.5)


def test_hermite_polynomials():
    z = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(hermite_h(2, z), z**2 - 2)
    np.testing.assert_allclose(hermite_h(4, z), z**4 - 12 * z**2 + 12)
    with pytest.raises(ValueError):
        hermite_h(11, z)


def test_hermite_orthogonality():
    for n in range(7):
        for m in range(7):
            got = mu_integral(lambda z: hermite_h(n, z) * hermite_h(m, z))
            want = hermite_norm2(n) if n == m else 0.0
            assert abs(got - want) <= 1e-10


def test_decompose_recovers_h1():
    sl = SimilaritySlice.from_function(100.0, lambda z: hermite_h(1, z))
    dec = decompose(sl, 1.5)
    assert dec.q1 == pytest.approx(1.0, abs=1e-10)
    assert abs(dec.q0) < 1e-10 and abs(dec.q2) < 1e-10


def test_decompose_leaves_h4_in_negative_part():
    sl = SimilaritySlice.from_function(100.0, lambda z: hermite_h(4, z))
    dec = decompose(sl, 1.5)
    assert max(abs(dec.q0), abs(dec.q1), abs(dec.q2)) < 1e-9
    c1 = chi1(dec.z_grid, 100.0, 1.5)
    np.testing.assert_allclose(dec.q_minus, c1 * hermite_h(4, dec.z_grid), atol=1e-6)


def test_to_similarity_of_profile_state():
    # y = (T - t)^{-1} phi(z, s) near a has remainder ~ 0
    spec = ProblemSpec(grid_points=4097, target_time=1e-2)
    T = spec.target_time
    z = (spec.x - spec.target_point) / math.sqrt(T)
    vals = phi(z, spec.s0, 2.0) / T * cutoff_chi0(z * math.sqrt(T) / spec.eps0)
    vals[0] = vals[-1] = 0.0
    sl = to_similarity(Field(vals, 0.0, spec.dx), spec)
    # the cutoff is 1 for |z| <= eps0 / sqrt(T) = 2
    inner = np.abs(sl.z_grid) < 1.9
    assert np.max(np.abs(sl.q[inner])) < 1e-6


def test_to_similarity_window_must_fit():
    spec = ProblemSpec(grid_points=513, omega_domain=(-0.3, 1.0), actuator=(-0.2, 0.6), eps0=0.2)
    with pytest.raises(ConfigurationError):
        to_similarity(Field(np.zeros(513), 0.0, spec.dx), spec)
