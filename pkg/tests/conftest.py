from __future__ import annotations

import pytest

from heatblow.solver_core import ProblemSpec


@pytest.fixture
def small_spec() -> ProblemSpec:
    return ProblemSpec(grid_points=513)
