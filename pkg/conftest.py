"""
Shared fixtures for the PTS test suite.
"""
import numpy as np
import pytest

from pts.linalg_core import Dataset
from pts.schemas import PtsConfig


@pytest.fixture
def fast_cfg():
    """Reduced starts/iterations so unit tests stay quick."""
    return PtsConfig(lts_starts=100, mcd_starts=100, max_iter=20, seed=3, threads=1)


@pytest.fixture
def line_data():
    """Simple regression y = 1 + 2x + small noise, n=30."""
    rng = np.random.default_rng(11)
    x = rng.uniform(0, 10, 30)
    y = 1.0 + 2.0 * x + rng.normal(0, 0.3, 30)
    return Dataset.from_arrays(x, y)


@pytest.fixture
def contaminated_line():
    """n=40 line with four gross vertical outliers at rows 0..3."""
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 10, 40)
    y = 1.0 + 2.0 * x + rng.normal(0, 0.5, 40)
    y[:4] += 40.0
    return Dataset.from_arrays(x, y)


def random_instance(seed: int, n: int = 14, p: int = 2, contamination: float = 0.2) -> Dataset:
    """Small contaminated regression instance used by the oracle comparisons."""
    rng = np.random.default_rng([seed, 99])
    Z = rng.normal(size=(n, p - 1))
    y = Z @ np.ones(p - 1) + rng.normal(size=n)
    m = int(round(contamination * n))
    y[:m] += rng.uniform(8, 15, m)
    return Dataset.from_arrays(Z, y)
