import numpy as np
import pytest

from qmath import random_channel, random_density


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_channel(rng):
    def _make(d_in=2, d_out=None, n_kraus=3):
        return random_channel(d_in, d_out or d_in, n_kraus, rng)

    return _make


@pytest.fixture
def make_state(rng):
    def _make(d=2, rank=None):
        return random_density(d, rng, rank)

    return _make
