import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from oran_offload.scenario import Scenario  # noqa: E402

settings.register_profile("repo", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def small_scenario(**kw) -> Scenario:
    """A few devices, short traffic trace and a tiny forecaster: fast to build."""
    base = dict(
        n_devices=12, horizon=6, eval_episodes=2,
        traffic={"seconds": 240},
        rl={"episodes": 4, "replay": 500, "batch": 16, "hidden": 16, "sync_every": 5},
        fl={"arch": "window", "hidden": 8, "lookback": 20, "rounds": 5, "max_windows": 64},
    )
    for k, v in kw.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            base[k] = {**base[k], **v}
        else:
            base[k] = v
    return Scenario(**base)


@pytest.fixture
def small():
    return small_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
