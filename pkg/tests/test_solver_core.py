from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatblow.solver_core import (BlowupEstimateError, Field, FunctionControl, NonlinearFeedback, ProblemSpec,
                                  StepRejected, StopRule, ZeroControl, diffuse, estimate_blowup, integrate,
                                  laplacian, read_snapshots_csv, s_uniform_times, step, write_snapshots_csv)


def test_spec_defaults_and_derived():
    spec = ProblemSpec()
    assert spec.T1 == pytest.approx(0.0125)
    assert spec.s0 == pytest.approx(-math.log(0.05))
    assert spec.kappa == 1.0
    assert spec.dx == pytest.approx(2 / 4096)
    assert spec.construction_ok()


@pytest.mark.parametrize("bad", [
    dict(target_time=-1.0), dict(exponent=1.0), dict(actuator=(-2.0, 0.0)),
    dict(T1=0.03), dict(target_point=1.5), dict(grid_points=2),
])
def test_spec_rejects(bad):
    with pytest.raises(ValueError):
        ProblemSpec(**bad)


def test_replace_resets_T1():
    spec = ProblemSpec(T1=0.01).replace(target_time=1.0)
    assert spec.T1 == 0.25


def test_actuator_mask_is_strict_interior(small_spec):
    x = small_spec.x
    m = small_spec.actuator_mask()
    assert np.all(m[(x > -0.6) & (x < 0.6)] == 1)
    assert np.all(m[np.isclose(x, 0.6) | np.isclose(x, -0.6)] == 0)


def test_diffuse_matches_dense_solve():
    n, dt, dx = 40, 1e-3, 0.05
    rng = np.random.default_rng(1)
    rhs = rng.standard_normal(n)
    rhs[0] = rhs[-1] = 0.0
    A = np.eye(n)
    r = dt / dx**2
    for i in range(1, n - 1):
        A[i, i - 1] = A[i, i + 1] = -r
        A[i, i] = 1 + 2 * r
    np.testing.assert_allclose(diffuse(rhs, dt, dx), np.linalg.solve(A, rhs), atol=1e-13)


def test_laplacian_of_quadratic():
    x = np.linspace(0, 1, 21)
    lap = laplacian(x**2, x[1] - x[0])
    np.testing.assert_allclose(lap[1:-1], 2.0, atol=1e-10)


def test_linear_heat_sup_error():
    # e^{-pi^2 t} sin(pi x) on (0, 1), 512 intervals, dt 1e-5
    spec = ProblemSpec(omega_domain=(0.0, 1.0), actuator=(0.4, 0.6), target_point=0.5, grid_points=513)
    y0 = Field(np.sin(math.pi * spec.x), 0.0, spec.dx)
    tr = integrate(spec, y0, ZeroControl(), StopRule(t_end=0.1, y_max=math.inf), dt_base=1e-5)
    exact = math.exp(-math.pi**2 * 0.1) * np.sin(math.pi * spec.x)
    err = float(np.max(np.abs(tr.final.values - exact)))
    assert tr.reason == "t_end" and tr.final.time == 0.1
    assert err == pytest.approx(1.931e-5, rel=1e-2)


def test_nonlinear_flow_is_exact_ode_solution():
    fb = NonlinearFeedback(2.0, np.ones(3))
    y = np.array([0.5, -1.0, 2.0])
    dt = 0.1
    np.testing.assert_allclose(fb.flow(y, dt), y / (1 - np.abs(y) * dt), rtol=1e-14)
    with pytest.raises(StepRejected):
        fb.flow(np.array([20.0, 0.0, 0.0]), 0.1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_step_is_odd(vals):
    v = np.array([0.0] + vals + [0.0])
    mask = np.ones_like(v)
    fb = NonlinearFeedback(2.0, mask)
    a = step(Field(v, 0.0, 0.1), 1e-3, fb, mask).values
    b = step(Field(-v, 0.0, 0.1), 1e-3, fb, mask).values
    np.testing.assert_allclose(a, -b, atol=1e-13)


def test_snapshots_land_exactly(small_spec):
    y0 = Field(np.zeros(small_spec.grid_points), 0.0, small_spec.dx)
    times = [0.001, 0.0025, 0.004]
    tr = integrate(small_spec, y0, ZeroControl(), StopRule(t_end=0.004), dt_base=7e-4, snapshot_times=times)
    assert [f.time for f in tr.snapshots[1:]] == times


def test_stop_reasons(small_spec):
    x = small_spec.x
    y0 = Field(50 * np.cos(math.pi * x / 2) ** 2, 0.0, small_spec.dx)
    fb = NonlinearFeedback(2.0, small_spec.actuator_mask())
    tr = integrate(small_spec, y0, fb, StopRule(t_end=1.0, y_max=1e6))
    assert tr.reason == "Y_max" and tr.final.sup >= 1e6
    tr = integrate(small_spec, y0, fb, StopRule(t_end=1.0, predicate=lambda f: f.sup > 100))
    assert tr.reason == "predicate"
    tr = integrate(small_spec, y0, fb, StopRule(t_end=1.0), max_steps=3)
    assert tr.reason == "max_steps" and tr.steps == 3


def test_function_control_caps_step():
    ctl = FunctionControl(lambda f: 10 * f.values, max_gain=10)
    assert ctl.max_dt(None) == 0.05


def test_estimate_blowup_on_flat_ode():
    # y = 1/(T - t) exactly: exponent -1 and t_est = T
    T = 0.3
    times = T - np.exp(-np.linspace(3, 12, 60))
    snaps = [Field(np.array([0.0, 1 / (T - t), 0.0]), t, 0.5) for t in times]
    est = estimate_blowup(snaps, 2.0, np.array([-0.5, 0.0, 0.5]))
    assert est.t_est == pytest.approx(T, abs=1e-14)
    assert est.rate_exponent == pytest.approx(-1.0, abs=1e-9)
    assert est.a_est == 0.0


def test_estimate_blowup_errors():
    snaps = [Field(np.array([0.0, 1.0 + k, 0.0]), 0.01 * k, 0.5) for k in range(5)]
    with pytest.raises(BlowupEstimateError):
        estimate_blowup(snaps, 2.0)
    snaps = [Field(np.array([0.0, 1.0 + (k % 3), 0.0]), 0.01 * k, 0.5) for k in range(12)]
    with pytest.raises(BlowupEstimateError):
        estimate_blowup(snaps, 2.0)


def test_s_uniform_times():
    t = s_uniform_times(1.0, 0.0, 0.5, 2.0)
    np.testing.assert_allclose(t, 1 - np.exp(-np.array([0, 0.5, 1.0, 1.5, 2.0])))


def test_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    snaps = [Field(rng.standard_normal(7), float(t), 0.1) for t in (0.0, 1 / 3, 2 / 7)]
    write_snapshots_csv(tmp_path / "f.csv", snaps)
    back = read_snapshots_csv(tmp_path / "f.csv", 0.1)
    for a, b in zip(snaps, back):
        assert a.time == b.time
        assert np.array_equal(a.values, b.values)
