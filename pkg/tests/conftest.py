import numpy as np
import pytest

from advcal.scenarios import coincident_pair, realizable_pair, three_point


@pytest.fixture
def tp():
    return three_point()


@pytest.fixture
def cp():
    return coincident_pair()


@pytest.fixture
def rp():
    return realizable_pair()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
