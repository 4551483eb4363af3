import numpy as np
import pytest

from robust_frechet import Dataset, QuantileFunction, SymMatrix, quantile_grid


def random_sym(rng, q, scale=1.0):
    a = rng.normal(scale=scale, size=(q, q))
    return SymMatrix((a + a.T) / 2.0)


def random_quantile(rng, grid=None, loc_scale=3.0):
    grid = quantile_grid() if grid is None else grid
    mu = rng.normal(scale=loc_scale)
    sigma = rng.uniform(0.2, 2.0)
    base = mu + sigma * np.linspace(-2.0, 2.0, grid.size)
    return QuantileFunction(grid, base)


def matrix_dataset(rng, n=12, q=3, p=1, noise=0.3):
    """Small matrix-response dataset with a linear signal in the covariate."""
    x = rng.uniform(size=(n, p))
    responses = []
    for i in range(n):
        signal = np.full((q, q), x[i, 0])
        np.fill_diagonal(signal, 1.0)
        bump = rng.normal(scale=noise, size=(q, q))
        responses.append(SymMatrix(signal + (bump + bump.T) / 2.0))
    return Dataset(x, tuple(responses))


def quantile_dataset(rng, n=12, m=21, noise=0.3):
    """Small distribution-response dataset with a linear location signal."""
    grid = np.linspace(0.1, 0.9, m)
    shape = np.linspace(-1.5, 1.5, m)
    x = rng.uniform(size=(n, 1))
    responses = []
    for i in range(n):
        mu = 3.0 * x[i, 0] + rng.normal(scale=noise)
        sigma = 1.0 + 0.5 * x[i, 0]
        responses.append(QuantileFunction(grid, mu + sigma * shape))
    return Dataset(x, tuple(responses))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
