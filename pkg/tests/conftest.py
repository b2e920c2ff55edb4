import numpy as np
import pytest

from defectmech import (
    build_disclination_body,
    build_dislocation_body,
    build_trivial_body,
    distance_squared,
    n_fold,
    neo_hookean,
)


@pytest.fixture(scope="session")
def isotropic():
    return distance_squared()


@pytest.fixture(scope="session")
def neo():
    return neo_hookean()


@pytest.fixture(scope="session")
def hexagonal():
    return n_fold(3)


@pytest.fixture(scope="session")
def disclination_body(isotropic):
    return build_disclination_body(0.5, 2.0, 1.0 / 6.0, isotropic)


@pytest.fixture(scope="session")
def dislocation_body(isotropic):
    return build_dislocation_body(0.1, 2.0, isotropic)


@pytest.fixture(scope="session")
def trivial_body(isotropic):
    return build_trivial_body(isotropic)


def rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
