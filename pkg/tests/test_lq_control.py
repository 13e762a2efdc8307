from __future__ import annotations

import math

import numpy as np
import pytest

from heatblow.lq_control import (GalerkinSystem, SupportOutsideActuator, LQFeedback, assemble_galerkin,
                                 galerkin_closed_loop, loewner_monotone, null_control_run,
                                 solve_riccati_backward)
from heatblow.solver_core import Field, ProblemSpec

SPEC = ProblemSpec(grid_points=1025)


def test_galerkin_assembly():
    sys = assemble_galerkin(SPEC, 8)
    np.testing.assert_allclose(sys.eigvals, (np.arange(1, 9) * math.pi / 2) ** 2)
    np.testing.assert_allclose(sys.B_mat, sys.B_mat.T, atol=1e-15)
    # B_kk = int_omega e_k^2 < 1, and B -> I when omega = Omega
    assert np.all(np.diag(sys.B_mat) < 1)
    full = assemble_galerkin(ProblemSpec(grid_points=513, actuator=(-1.0, 1.0)), 6)
    np.testing.assert_allclose(full.B_mat, np.eye(6), atol=1e-13)


def test_projection_of_basis_function():
    sys = assemble_galerkin(SPEC, 6)
    e3 = sys.basis(SPEC.x)[2]
    c = sys.project(e3, SPEC.dx)
    assert c[2] == pytest.approx(1.0, abs=1e-5)
    assert np.max(np.abs(np.delete(c, 2))) < 1e-12


def test_scalar_riccati_oracle():
    a, tau, M = 1.0, 1.0, 1e8
    ric = solve_riccati_backward(GalerkinSystem(1, np.array([-a]), np.array([[1.0]])), tau, M)
    for t in np.linspace(0, 0.9, 10):
        want = 2 * a / (1 - math.exp(-2 * a * (tau - t)))
        assert ric(t)[0, 0] == pytest.approx(want, rel=1e-6)
    assert ric(tau)[0, 0] == M


def test_scalar_energy_identity():
    # int v^2 = P(0) z0^2 - M z(tau)^2 along the optimal loop
    sys = GalerkinSystem(1, np.array([-1.0]), np.array([[1.0]]))
    ric = solve_riccati_backward(sys, 1.0, 1e8)
    loop = galerkin_closed_loop(sys, ric, np.array([1.0]), np.linspace(0, 1, 11))
    assert loop.energy == pytest.approx(ric(0)[0, 0] - 1e8 * loop.z[-1, 0] ** 2, rel=1e-8)
    assert np.all(np.diff(loop.quad_form) <= 1e-9 * loop.quad_form[0])


def test_uncontrolled_mode_decays_like_exp():
    # M = 0 gives P = 0: z(t) = e^{-lambda t} z0
    sys = GalerkinSystem(2, np.array([1.0, 4.0]), np.zeros((2, 2)))
    ric = solve_riccati_backward(sys, 1.0, 0.0)
    loop = galerkin_closed_loop(sys, ric, np.array([1.0, 1.0]), np.array([0.0, 1.0]))
    np.testing.assert_allclose(loop.z[-1], np.exp([-1.0, -4.0]), rtol=1e-8)


def test_loewner_and_quad_form_monotone():
    sys = assemble_galerkin(SPEC, 16)
    ric = solve_riccati_backward(sys, 0.5, 1e5)
    assert loewner_monotone(ric)
    c0 = sys.project(np.sin(math.pi * SPEC.x), SPEC.dx)
    loop = galerkin_closed_loop(sys, ric, c0, np.linspace(0, 0.5, 26))
    assert np.max(np.diff(loop.quad_form)) <= 1e-6 * loop.quad_form[0]


def test_feedback_rejects_target_outside_actuator():
    sys = assemble_galerkin(SPEC, 4)
    ric = solve_riccati_backward(sys, 0.5, 1e3)
    with pytest.raises(SupportOutsideActuator):
        LQFeedback(ric, sys, SPEC, np.where(np.abs(SPEC.x) > 0.7, 1.0, 0.0) * (1 - SPEC.x**2))


def test_null_control_improves_with_M():
    y0 = Field(np.sin(math.pi * SPEC.x), 0.0, SPEC.dx)
    sys = assemble_galerkin(SPEC, 32)
    r5 = null_control_run(SPEC, y0, 0.5, M=1e5, sys=sys).ratio
    r6 = null_control_run(SPEC, y0, 0.5, M=1e6, sys=sys).ratio
    assert r6 < r5
    assert r6 == pytest.approx(1.04e-5, rel=0.05)


def test_lyapunov_limit_without_control():
    # B = 0: P_kk(t) = M e^{-2 lambda_k (tau - t)} with lambda_k the decay rates
    lam = np.array([1.0, 3.0])
    ric = solve_riccati_backward(GalerkinSystem(2, lam, np.zeros((2, 2))), 0.5, 10.0)
    for t in (0.0, 0.2, 0.45):
        np.testing.assert_allclose(np.diag(ric(t)), 10 * np.exp(-2 * lam * (0.5 - t)), rtol=1e-6)
