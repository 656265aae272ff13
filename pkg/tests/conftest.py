import numpy as np
import pytest

from sace.data import Dataset, standardize


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_standardized(rng, n=20, p=6, q=2, sigma=0.1, signal=2.0):
    """Small standardized regression instance with the first q coordinates
    active; returns (Dataset, record, true beta on the raw scale)."""
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:q] = signal * np.where(rng.uniform(size=q) < 0.5, -1.0, 1.0)
    y = X @ beta + sigma * rng.normal(size=n)
    ds, record = standardize(Dataset(X, y))
    return ds, record, beta


@pytest.fixture
def small_instance(rng):
    return random_standardized(rng)
