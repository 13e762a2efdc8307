from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatblow.kernel_lab import (KernelDomainError, TailTruncationWarning, apply_semigroup, composition_error,
                                 eigen_error, kernel_moments, mehler_kernel, moment_bound_check, moment_ratios)
from heatblow.similarity import hermite_h


def test_mehler_value():
    assert mehler_kernel(1.0, 0.0, 0.0) == pytest.approx(0.9644719294512293, rel=1e-14)
    with pytest.raises(KernelDomainError):
        mehler_kernel(1e-13, 0.0, 0.0)


def test_kernel_mass():
    # int e^{theta L}(z, x) dx = e^theta
    assert apply_semigroup(0.7, lambda x: np.ones_like(x), [0.0, 3.0]) == pytest.approx(math.exp(0.7), rel=1e-13)


@pytest.mark.parametrize("theta", [0.1, 0.5, 1.0, 2.0])
def test_eigenrelation(theta):
    z = np.linspace(-10, 10, 101)
    for m in range(5):
        assert eigen_error(theta, m, z) <= 1e-8


def test_composition():
    z = np.linspace(-5, 5, 11)
    assert composition_error(0.3, 0.7, 3, z) <= 1e-7


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(-10, 10))
def test_m4_moment_matches_closed_form(theta, z):
    # E (mu + sd Z)^4 = mu^4 + 6 mu^2 sd^2 + 3 sd^4
    shift, sd = kernel_moments(theta)
    mu = z * shift
    want = (1 + mu**4 + 6 * mu**2 * sd**2 + 3 * sd**4) / (1 + z**4)
    assert moment_ratios(theta, 4, z)[0] == pytest.approx(want, rel=1e-12)


def test_moment_bound_peak():
    # the sup over |z| <= 10 at m = 4, theta = 2 sits off zero and exceeds 10
    r = moment_ratios(2.0, 4, np.array([0.0, 0.26494]))
    assert r[0] == pytest.approx(9.971740868986103, rel=1e-12)
    assert r[1] == pytest.approx(10.021024468683814, rel=1e-9)
    assert moment_bound_check(2.0, 0, [0.0]) == 1.0
    with pytest.raises(ValueError):
        moment_bound_check(6.0, 2, [0.0])


def test_sampled_input_and_tail_warning():
    x = np.linspace(-30, 30, 3001)
    got = apply_semigroup(0.5, hermite_h(2, x), 1.0, x_grid=x)
    assert got[0] == pytest.approx(hermite_h(2, 1.0), rel=1e-6)
    short = np.linspace(-2, 2, 201)
    with pytest.warns(TailTruncationWarning):
        apply_semigroup(1.0, np.ones_like(short), 0.0, x_grid=short)
