import pytest

from regenbound import Exponential, Gamma, Uniform, validate
from regenbound.splitting import compute_split


@pytest.fixture(scope="session")
def uniform01():
    return validate(Uniform(0, 1))


@pytest.fixture(scope="session")
def gamma21():
    return validate(Gamma(2, 1))


@pytest.fixture(scope="session")
def exp1():
    return validate(Exponential(1.0))


@pytest.fixture(scope="session")
def split_uniform(uniform01):
    return compute_split(uniform01)


@pytest.fixture(scope="session")
def split_gamma(gamma21):
    return compute_split(gamma21)


@pytest.fixture(scope="session")
def split_exp(exp1):
    return compute_split(exp1)
