import numpy as np
import pytest

from partialid.dsl import builtin_graph


@pytest.fixture(scope="session")
def iv():
    return builtin_graph("iv")


@pytest.fixture(scope="session")
def ivcov():
    return builtin_graph("ivcov")


@pytest.fixture(scope="session")
def frontdoor():
    return builtin_graph("frontdoor")


@pytest.fixture(scope="session")
def sequential():
    return builtin_graph("sequential")


@pytest.fixture(scope="session")
def bonet():
    return builtin_graph("bonet")


@pytest.fixture(scope="session")
def inclusive_frontdoor():
    return builtin_graph("inclusive_frontdoor")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
