import numpy as np
import pytest

from nvsim.hamiltonian import PhysicalConstants

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def consts():
    return PhysicalConstants()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
