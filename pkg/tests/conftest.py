import numpy as np
import pytest

from cdsolitons.model import SpectralStep, su2_config, vacuum_seed
from cdsolitons.su2 import ScalarSpectralPoint

ACCEPTANCE_LINES = []

# three well-separated SU(2) solitons: (kappa, beta/alpha)
SOLITONS = [(0.5, 1.0), (0.8, -1.2), (1.3, 0.7)]


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def su2_seed():
    return vacuum_seed(su2_config())


@pytest.fixture(scope="session")
def su2_stages():
    return [SpectralStep.su2_pair(1j * k, (1.0, b)) for k, b in SOLITONS]


@pytest.fixture(scope="session")
def su2_points():
    return [ScalarSpectralPoint(1j * k, 1.0, b) for k, b in SOLITONS]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
