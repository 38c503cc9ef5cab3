import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dualfield.assembly import assemble_system
from dualfield.spaces import Discretization

settings.register_profile(
    "ci",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("ci")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end runs (minutes)")


@pytest.fixture(scope="session")
def disc22():
    return Discretization.build(2, 2)


@pytest.fixture(scope="session")
def disc32():
    return Discretization.build(3, 2)


@pytest.fixture(scope="session")
def mats22(disc22):
    return assemble_system(disc22)


@pytest.fixture(scope="session")
def mats32(disc32):
    return assemble_system(disc32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
