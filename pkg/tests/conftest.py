import math

import pytest

from sphereflow import compute_spectrum, make_domain


@pytest.fixture(scope="session")
def box63():
    return make_domain(1, [math.pi], [63])


@pytest.fixture(scope="session")
def spec63(box63):
    return compute_spectrum(box63)


@pytest.fixture(scope="session")
def box2d():
    return make_domain(2, [1.0, 2.0], [4, 5])
