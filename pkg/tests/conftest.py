import numpy as np
import pytest

from twosig import HalfGrid, PenaltyParams


@pytest.fixture
def unit_penalty():
    return PenaltyParams(1.0, 1.0, 0.25)


@pytest.fixture
def small_grid():
    return HalfGrid(33, 17, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
