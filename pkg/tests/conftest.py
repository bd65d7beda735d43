import numpy as np
import pytest

from dissipative.model import OpticalModel, PotentialSpec, RadialGrid
from dissipative.singularities import construct_singularity


def well(depth, radius=1.0):
    return PotentialSpec.square_well(depth, radius)


@pytest.fixture(scope="session")
def constructed():
    """Singular model built from V = -6 on [0,1] and C0 = 1 on [0,1]."""
    return construct_singularity(well(-6.0), well(1.0), (0.5, 6.0), RadialGrid(2.0, 400))


@pytest.fixture
def absorbing_well():
    return OpticalModel(well(-3.0), well(0.3), RadialGrid(2.0, 400))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def constructed_scan(constructed):
    from dissipative.singularities import scan_singularities

    lam = constructed.lam_star
    return scan_singularities(constructed.model, (lam / 2, 2 * lam), 200, ell_max=8)


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
