import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qlmsim import build_lattice, enumerate_sector, initial_string_state
from qlmsim.hamiltonian import CouplingParameters


@pytest.fixture(scope="session")
def geom22():
    return build_lattice(2, 2)


@pytest.fixture(scope="session")
def geom23():
    return build_lattice(2, 3)


@pytest.fixture(scope="session")
def geom43():
    return build_lattice(4, 3)


@pytest.fixture(scope="session")
def geom54():
    return build_lattice(5, 4)


@pytest.fixture(scope="session")
def sector43(geom43):
    seed, _ = initial_string_state(geom43, "diagonal")
    return enumerate_sector(geom43, seed)


@pytest.fixture(scope="session")
def sector54(geom54):
    seed, _ = initial_string_state(geom54, "diagonal")
    return enumerate_sector(geom54, seed)


@pytest.fixture(scope="session")
def resonant_params():
    return CouplingParameters(kappa=1.0, mass=3.0, efield=6.0, plaq=2.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
