import numpy as np
import pytest

from iwatsuka import make_grid
from iwatsuka.field import random_field

import _report


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(1.0, 8, 16, 8.0)


@pytest.fixture(scope="session")
def grid16():
    return make_grid(1.0, 16, 32, 16.0)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(1.0, 32, 64, 16.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rand_field(grid16, rng):
    return random_field(grid16, rng)


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in _report.LINES:
            terminalreporter.write_line(line)
