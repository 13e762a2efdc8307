from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatblow.localization import (BallConfigurationError, Balls, argmax_distance_to_actuator,
                                   localization_certificate, parabolic_T1_bound)
from heatblow.solver_core import Field, ProblemSpec, StopRule, ZeroControl, integrate

SPEC = ProblemSpec(grid_points=1025)
BALLS = Balls(0.8, 0.05, 0.1, 0.15)


def test_ball_validation():
    BALLS.validate(SPEC)
    with pytest.raises(BallConfigurationError):
        Balls(0.65, 0.02, 0.04, 0.08).validate(SPEC)
    with pytest.raises(BallConfigurationError):
        Balls(0.9, 0.05, 0.1, 0.15).validate(SPEC)
    with pytest.raises(BallConfigurationError):
        Balls.from_intervals((0.7, 0.8), (0.6, 0.95), (0.6, 0.98))


def test_chi2_plateaus():
    x = SPEC.x
    c = BALLS.chi2(x)
    assert np.all(c[np.abs(x - 0.8) <= 0.05] == 1.0)
    assert np.all(c[np.abs(x - 0.8) >= 0.1] == 0.0)


def test_zero_trajectory():
    snaps = [Field(np.zeros(SPEC.grid_points), t, SPEC.dx) for t in (0.0, 0.01, 0.02)]
    rep = localization_certificate(snaps, SPEC, BALLS)
    assert rep.passed
    assert max(rep.sup_B0) == 0.0 and max(rep.sup_annulus) == 0.0


def test_linear_heat_self_test():
    x = SPEC.x
    y0 = Field(np.cos(math.pi * x / 2), 0.0, SPEC.dx)
    tr = integrate(SPEC, y0, ZeroControl(), StopRule(t_end=0.05), dt_base=1e-4,
                   snapshot_times=np.linspace(0, 0.05, 51)[1:])
    rep = localization_certificate(tr.snapshots, SPEC, BALLS)
    assert rep.passed
    for s, d in zip(rep.sup_B0, rep.duhamel_sup):
        assert abs(d - s) <= 0.05 * s


def test_parabolic_bound_value():
    assert parabolic_T1_bound(1.0, 0.1, 1.0, 1.0) == pytest.approx(9.4606e-8, rel=1e-4)
    assert parabolic_T1_bound(1.0, 0.1, 1.0, 1e-12) == 1.0
    with pytest.raises(ValueError):
        parabolic_T1_bound(0.0, 0.1, 1.0, 1.0)


@given(st.floats(0.1, 1.0), st.floats(0.01, 0.5), st.floats(0.1, 3.0))
def test_parabolic_bound_monotone(eps, eps0, sigma1):
    b = parabolic_T1_bound(eps, eps0, sigma1, 1.0)
    assert parabolic_T1_bound(eps, eps0, sigma1 + 0.5, 1.0) <= b
    assert parabolic_T1_bound(eps, eps0 / 2, sigma1, 1.0) <= b
    assert parabolic_T1_bound(min(eps * 1.5, 1.0), eps0, sigma1, 1.0) >= b


def test_argmax_distance():
    v = np.zeros(SPEC.grid_points)
    i = int(np.argmin(np.abs(SPEC.x - 0.8)))
    v[i] = 1.0
    assert argmax_distance_to_actuator(Field(v, 0.0, SPEC.dx), SPEC) == pytest.approx(SPEC.x[i] - 0.6)
    v[np.argmin(np.abs(SPEC.x))] = 2.0
    assert argmax_distance_to_actuator(Field(v, 0.0, SPEC.dx), SPEC) == 0.0
