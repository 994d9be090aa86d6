import numpy as np
import pytest

from steinbounds import FiniteDistPair


@pytest.fixture()
def bernoulli():
    return FiniteDistPair([0.5, 0.5], [0.25, 0.75])


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
