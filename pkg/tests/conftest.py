import numpy as np
import pytest

from dccatest.asymptotics import tabulate


@pytest.fixture(scope="session")
def tiny_table():
    """Small covariance table for fast plumbing tests."""
    return tabulate(grid=[0.5, 0.7, 0.9], n_tab=128,
                    ratios=[0.05, 0.1, 0.2, 0.4, 0.7, 1.0], degree=1)


@pytest.fixture(scope="session")
def full_table():
    """The covariance table shipped with the package."""
    from dccatest.cli import _load_table
    table, _, _ = _load_table(None)
    return table


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
