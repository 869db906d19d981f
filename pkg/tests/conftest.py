import numpy as np
import pytest

from qbsde import RandomSource, build_grid, simulate_scenario


@pytest.fixture(scope="session")
def bundle_1d():
    """40k paths, 20 steps, one driving dimension."""
    return simulate_scenario(build_grid(1.0, 20), dim_m=1, dim_orth=0, n_paths=40_000,
                             source=RandomSource(seed=314159))


@pytest.fixture(scope="session")
def bundle_orth():
    """Driving dimension plus one orthogonal component."""
    return simulate_scenario(build_grid(1.0, 16), dim_m=1, dim_orth=1, n_paths=20_000,
                             source=RandomSource(seed=271828))


@pytest.fixture(scope="session")
def bundle_2d():
    return simulate_scenario(build_grid(1.0, 16), dim_m=2, dim_orth=0, n_paths=20_000,
                             source=RandomSource(seed=161803))


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
