import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from displab.exponents import ProblemParams
from displab.radial_transform import Domain

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def p2():
    return ProblemParams(2, "3/2", 0)


@pytest.fixture(scope="session")
def dom2():
    return Domain(2)


@pytest.fixture(scope="session")
def gauss2(dom2):
    return dom2.profile(lambda r: np.exp(-r ** 2 / 2))
