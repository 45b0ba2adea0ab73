import numpy as np
import pytest

from ibedge.gaussian_ib import GaussianSource, make_synthetic_source, solve_gib


@pytest.fixture
def scalar_source():
    """C_X = C_Y = 1, correlation 0.5, so lambda = 0.75."""
    return GaussianSource([[1.0]], [[1.0]], [[0.5]])


@pytest.fixture
def half_source():
    """Scalar source with lambda = 0.5 (rho^2 = 0.5)."""
    return GaussianSource([[1.0]], [[1.0]], [[np.sqrt(0.5)]])


@pytest.fixture
def small_sol():
    return solve_gib(make_synthetic_source(6, 2, 1.0, 3))


@pytest.fixture(scope="session")
def big_source():
    return make_synthetic_source(750, 8, 0.05, 0)


@pytest.fixture(scope="session")
def big_sol(big_source):
    return solve_gib(big_source)
