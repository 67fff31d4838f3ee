import numpy as np
import pytest

from pairsim.model import ModelParams, PopulationFractions

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_symmetric(rng, lo=0.1, hi=3.0):
    """Random symmetric 2x2 preference matrix entries (pi11, pi12, pi22)."""
    return rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)


def sym_params(pi11, pi12, pi22):
    return ModelParams.from_pi([[pi11, pi12], [pi12, pi22]])


def sym_fractions(x1):
    return PopulationFractions([x1, 1 - x1], [x1, 1 - x1])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fb_params():
    return ModelParams.from_pi([[2.0, 3.0], [3.0, 4.0]])


@pytest.fixture
def homog_params():
    return ModelParams.from_pi([[3.0, 1.0], [1.0, 2.0]])


@pytest.fixture
def half():
    return PopulationFractions([0.5, 0.5], [0.5, 0.5])
