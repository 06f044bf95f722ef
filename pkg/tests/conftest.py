import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from viscoenergetic import (DoubleWellParams, LoadProfile, convex_quadratic_model, double_well_model,
                            marginal_model)

settings.register_profile("repo", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def quad():
    """E = u^2/2 - t u, alpha = 1, mu = 1."""
    return convex_quadratic_model()


@pytest.fixture(scope="session")
def quad_frozen():
    """E = u^2/2 at every time, alpha = 1, mu = 1."""
    return convex_quadratic_model(load=LoadProfile.constant(0.0))


@pytest.fixture(scope="session")
def dw():
    return double_well_model(DoubleWellParams())


@pytest.fixture(scope="session")
def dw_zero_load():
    """Double well with l = 0, alpha = 1, mu = 1."""
    return double_well_model(DoubleWellParams(mu=1.0, load=LoadProfile.constant(0.0)))


@pytest.fixture(scope="session")
def marginal():
    return marginal_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
