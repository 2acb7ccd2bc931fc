import numpy as np
import pytest

import plastiflow as pf


@pytest.fixture(scope="session")
def unit_interval_200():
    return pf.build_interval(1.0, 1.0 / 200)


@pytest.fixture(scope="session")
def unit_interval_100():
    return pf.build_interval(1.0, 1.0 / 100)


@pytest.fixture(scope="session")
def unit_square_20():
    return pf.build_rectangle(1.0, 1.0, 1.0 / 20)


@pytest.fixture(scope="session")
def params_1_4():
    return pf.Parameters(1.0, 4.0)


@pytest.fixture(scope="session")
def profile_theta4():
    return pf.separable_profile(4.0)


def sine_field(domain, n=1):
    x = domain.axes[0]
    return pf.GridFunction(domain, np.sin(n * np.pi * x))


def random_dirichlet_field(domain, rng, scale=1.0):
    """Smooth-ish random field vanishing on the boundary."""
    x = domain.axes[0]
    vals = np.zeros_like(x)
    for n in range(1, 6):
        vals += rng.normal(0, scale / n) * np.sin(n * np.pi * x)
    vals[0] = vals[-1] = 0.0
    return pf.GridFunction(domain, vals)
