import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ket(*amps):
    v = np.asarray(amps, dtype=complex)
    return v / np.linalg.norm(v)
