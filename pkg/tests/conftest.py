import numpy as np
import pytest

from rydarray import (
    CIRCULAR_POLARIZATION,
    Lattice,
    ProbeMode,
    build_disc_lattice,
    coupling_matrices,
)


@pytest.fixture(scope="session")
def disc10():
    return build_disc_lattice(10, 0.75)


@pytest.fixture(scope="session")
def coupling10(disc10):
    return coupling_matrices(disc10)


@pytest.fixture(scope="session")
def disc6():
    return build_disc_lattice(6, 0.75)


@pytest.fixture(scope="session")
def coupling6(disc6):
    return coupling_matrices(disc6)


@pytest.fixture(scope="session")
def mode_w2():
    return ProbeMode(power=1e-6, w0=2.0)


@pytest.fixture(scope="session")
def single_atom():
    lattice = Lattice(np.zeros((1, 3)), 1.0, 1, CIRCULAR_POLARIZATION)
    return lattice, coupling_matrices(lattice)


@pytest.fixture(scope="session")
def pair_chain():
    """Two atoms at 0.6 lambda along x."""
    positions = np.array([[0.0, 0.0, 0.0], [0.6, 0.0, 0.0]])
    lattice = Lattice(positions, 0.6, 2, CIRCULAR_POLARIZATION)
    return lattice, coupling_matrices(lattice)
