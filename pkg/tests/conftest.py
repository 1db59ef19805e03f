import dataclasses as dc

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irsmec import ChannelParams, GameParams, ScenarioConfig, SystemConfig, realize

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def small_system(v=3, k=4, n=4, **scenario):
    sc = dc.replace(ScenarioConfig(), num_vehicles=v, num_elements=k, num_slots=n, **scenario)
    return SystemConfig(sc, ChannelParams(), game=GameParams())


@pytest.fixture
def system():
    return small_system()


@pytest.fixture
def inst(system):
    return realize(system, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
