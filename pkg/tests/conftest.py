import numpy as np
import pytest

from hexwave.lattice import make_triangular_lattice, make_basis
from hexwave.medium import make_honeycomb_scalar_weight, make_sigma2_weight
from hexwave.dirac import extract_dirac_data


@pytest.fixture(scope="session")
def lattice():
    return make_triangular_lattice()


@pytest.fixture(scope="session")
def honeycomb_A(lattice):
    return make_honeycomb_scalar_weight(0.1)


@pytest.fixture(scope="session")
def weight_B(lattice):
    return make_sigma2_weight(1.0)


@pytest.fixture(scope="session")
def basis12():
    return make_basis(12)


@pytest.fixture(scope="session")
def dirac_data(honeycomb_A, weight_B, lattice):
    """Gauge-fixed Dirac data for the delta = 0.1 honeycomb weight at M = 12."""
    return extract_dirac_data(honeycomb_A, weight_B, lattice, M=12)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
