from __future__ import annotations

import math

import numpy as np
import pytest

from heatblow.initial_data import Rectangle, admissible_rect
from heatblow.shooting import (SearchConfig, ShotConfig, ShotStatus, boundary_points, find_blowup_params, shoot,
                               winding_number)
from heatblow.shrinking_set import SQUARE
from heatblow.solver_core import ProblemSpec

# inside the construction regime (b0, b1 > 1/2)
REGIME = ProblemSpec(target_time=1e-4, grid_points=16385)


def _circle(n, turns=1):
    a = 2 * math.pi * turns * np.arange(n) / n
    return list(zip(np.cos(a), np.sin(a)))


def test_winding_number():
    assert winding_number(_circle(16)) == 1
    assert winding_number(_circle(16)[::-1]) == -1
    assert winding_number(_circle(40, 2)) == 2
    assert winding_number([(1.0, 0.1), (2.0, 0.0), (1.0, -0.1)]) == 0


def test_boundary_points_ccw():
    pts = boundary_points(Rectangle(1.0, 2.0), 16)
    assert len(pts) == 16
    assert pts[0] == (-1.0, -2.0)
    assert winding_number(pts) == 1
    with pytest.raises(ValueError):
        boundary_points(Rectangle(1.0, 1.0), 4)


def test_corner_shot_exits_at_start():
    (l0, _), (l1, _) = admissible_rect(REGIME).bounds
    r = shoot(l0, l1, REGIME, ShotConfig())
    assert r.status is ShotStatus.EXIT
    assert r.phi_exit.exit_constraint in SQUARE
    assert r.s_star == pytest.approx(REGIME.s0)
    assert max(abs(v) for v in r.phi) >= 1.0


def test_search_in_regime():
    sr = find_blowup_params(REGIME, SearchConfig(landscape=0), ShotConfig())
    assert sr.success
    assert sr.d0 == pytest.approx(0.013944624146592222, abs=1e-8)
    assert sr.d1 == 0.0
    assert sr.best.reason == "Y_max"
