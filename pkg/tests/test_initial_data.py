from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatblow.initial_data import (AdmissibilityError, InitialDataParams, SupportError, admissible_rect,
                                   b_coefficients, basis_fields, build_y0, regime_checks)
from heatblow.solver_core import ProblemSpec

SPEC = ProblemSpec(grid_points=1025)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_y0_affine_in_parameters(d0, d1):
    g00, g0, g1 = basis_fields(SPEC)
    y = build_y0(InitialDataParams(d0, d1, SPEC)).values
    np.testing.assert_allclose(y, g00 + d0 * g0 + d1 * g1, rtol=1e-12, atol=1e-9)


def test_y0_support_and_boundary():
    f, rep = build_y0(InitialDataParams(0.3, -0.2, SPEC), with_report=True)
    x = SPEC.x
    assert f.values[0] == f.values[-1] == 0.0
    assert np.all(f.values[np.abs(x) >= rep.support_radius + SPEC.dx] == 0.0)
    assert "support_exceeds_eps0_over_4" in rep.flags


def test_support_error_when_actuator_too_small():
    spec = ProblemSpec(grid_points=513, actuator=(-0.1, 0.1), eps0=0.2)
    with pytest.raises(SupportError):
        build_y0(InitialDataParams(0.0, 0.0, spec))


def test_rectangle_in_construction_regime():
    rect = admissible_rect(ProblemSpec(target_time=1e-4, grid_points=513))
    assert rect.b0 == pytest.approx(0.98044, abs=1e-5)
    assert rect.b1 == pytest.approx(0.86598, abs=1e-5)
    assert rect.bounds[0][1] == pytest.approx(1 / rect.b0)
    assert rect.flags == ()


def test_rectangle_outside_regime():
    spec = ProblemSpec(grid_points=513)
    with pytest.raises(AdmissibilityError):
        admissible_rect(spec)
    rect = admissible_rect(spec, strict=False)
    assert "b_below_half" in rect.flags and "clipped_to_2" in rect.flags
    assert rect.d1_half == 2.0
    assert not regime_checks(spec)["b1_above_half"]


def test_b_coefficients_trend():
    # chi1(2z) -> 1 as s0 grows, so b0 -> 1 and b1 -> int z^2/2 dmu = 1
    b0, b1 = b_coefficients(200.0, 2.0)
    assert b0 == pytest.approx(1.0, abs=1e-12)
    assert b1 == pytest.approx(1.0, abs=1e-12)
    b0, _ = b_coefficients(9.0, 2.0)
    assert 0.5 < b0 <= 1.0
