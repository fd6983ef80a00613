import numpy as np
import pytest

from pnsl.experiments import solve_cached


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(987654321)


@pytest.fixture(scope="session")
def cached_solve():
    """Session-wide memoized solve, shared across modules."""
    return solve_cached
