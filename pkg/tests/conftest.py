import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_sine_dataset(n=60, seed=0, noisy=True):
    """Small 1d heteroscedastic regression set used across model tests."""
    from qsb.data import Dataset

    g = np.random.default_rng(seed)
    x = np.sort(g.uniform(-1.0, 1.0, n)).reshape(-1, 1)
    y = 5.0 * np.sin(8.0 * x[:, 0])
    if noisy:
        y = y + (0.2 + 3.0 * x[:, 0] ** 3) * g.standard_normal(n)
    return Dataset(x, y, [(-1.0, 1.0)])
