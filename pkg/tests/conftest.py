import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def w2_between_samples(a, b):
    """W2 distance between two equal-size empirical laws."""
    a, b = np.sort(np.asarray(a)), np.sort(np.asarray(b))
    assert a.size == b.size
    return float(np.sqrt(np.mean((a - b) ** 2)))
