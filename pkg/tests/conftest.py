import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gradrubin.geometry import Domain2D, make_grid

settings.register_profile(
    "default", deadline=None, derandomize=True, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def annulus():
    return Domain2D(2.0)


@pytest.fixture(scope="session")
def small_grid(annulus):
    return make_grid(annulus, 64, 8)


def rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))


@pytest.fixture(scope="session")
def suite_result():
    """Run each verification suite at most once per session."""
    from gradrubin.suites import SUITES
    cache = {}

    def run(name):
        if name not in cache:
            cache[name] = SUITES[name]()
        return cache[name]
    return run


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
