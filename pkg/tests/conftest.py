import numpy as np
import pytest

from channel_math import derive_params


@pytest.fixture
def channel():
    """eta = 0.5, nbar_b = 1: gain 1.5, tau 1/3"""
    return derive_params(0.5, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
