"""Acceptance suite: one line per criterion, from the shipped scenario configs.

Each scenario runs once per session into a temporary directory. Expect a few
minutes in total; the blowup searches dominate.
"""

from __future__ import annotations

from pathlib import Path

import pytest

from heatblow.harness import load_config, run_scenario
from heatblow.harness.config import SCENARIOS

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
CRITERION_SCENARIO = {n: kind for kind, ns in SCENARIOS.items() for n in ns}


@pytest.fixture(scope="session")
def outcomes(tmp_path_factory):
    cache = {}
    root = tmp_path_factory.mktemp("acceptance")

    def get(kind):
        if kind not in cache:
            cfg = load_config(CONFIGS / f"{kind}.ini")
            cfg.output = root / kind
            cache[kind] = run_scenario(cfg)
        return cache[kind]

    return get


def test_every_criterion_has_one_scenario():
    assert sorted(CRITERION_SCENARIO) == list(range(1, 13))
    assert sum(len(v) for v in SCENARIOS.values()) == 12


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 13))
def test_criterion(number, outcomes, capsys):
    res = {r.number: r for r in outcomes(CRITERION_SCENARIO[number]).results}[number]
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.passed, res.line()
