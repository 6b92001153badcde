import numpy as np
import pytest

from randnls.spectral import Field, GridSpec


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return Field.physical(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def gaussian_field(grid, width, amplitude=1.0):
    r = grid.radius()
    return Field.physical(grid, (amplitude * np.exp(-r * r / (2.0 * width * width))).astype(complex))


@pytest.fixture
def g8():
    return GridSpec(8, 2 * np.pi, 3)


@pytest.fixture
def g16():
    return GridSpec(16, 2 * np.pi, 3)


@pytest.fixture
def g1():
    return GridSpec(64, 2 * np.pi, 1)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
