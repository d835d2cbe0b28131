import numpy as np
import pytest

from twoweight import GridSpec, LeafMeasure, build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_measure(grid, rng, zero_fraction=0.0, low=0.0, high=1.0):
    masses = rng.uniform(low, high, grid.num_leaves)
    if zero_fraction > 0:
        masses[rng.random(grid.num_leaves) < zero_fraction] = 0.0
    return LeafMeasure(grid, masses)


def grid_1d(depth):
    return build_grid(GridSpec(1, depth))
