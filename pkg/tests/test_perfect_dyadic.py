"""Perfect dyadic kernels: validation, generation, classification, CSV."""

import numpy as np
import pytest

from twoweight import GridSpec, HaarRectangle, build_grid, weighted_haar
from twoweight import serialize
from twoweight.exceptions import KernelValidationError
from twoweight.localization import ewl_radius
from twoweight.perfect_dyadic import (
    PerfectDyadicKernel,
    _leaf_distances,
    corrupt_kernel,
    perfect_dyadic_operator,
    random_kernel,
    validate_kernel,
)

from conftest import random_measure


def test_zero_kernel_zero_operator(rng):
    grid = build_grid(GridSpec(1, 3))
    sigma = random_measure(grid, rng)
    omega = random_measure(grid, rng)
    k = PerfectDyadicKernel(grid, np.zeros((8, 8)), 1)
    t = perfect_dyadic_operator(k, sigma, omega)
    assert np.allclose(t.w, 0.0, atol=1e-15)


@pytest.mark.parametrize("radius", [0, 1])
def test_random_kernels_validate_and_classify(radius, rng):
    grid = build_grid(GridSpec(1, 4))
    sigma = random_measure(grid, rng, low=0.1)
    omega = random_measure(grid, rng, low=0.1)
    for seed in range(10):
        k = random_kernel(grid, radius, seed)
        validate_kernel(k)
        t = perfect_dyadic_operator(k, sigma, omega)
        assert ewl_radius(t) <= radius


def test_constant_kernel_annihilates_haar(rng):
    grid = build_grid(GridSpec(1, 4))
    sigma = random_measure(grid, rng, low=0.1)
    omega = random_measure(grid, rng, low=0.1)
    c = 0.9 / float(np.max(_leaf_distances(grid)))
    k = PerfectDyadicKernel(grid, np.full((16, 16), c), 1)
    t = perfect_dyadic_operator(k, sigma, omega)
    h = weighted_haar(HaarRectangle(grid, 5), sigma)
    assert np.allclose(t.apply(h.values), 0.0, atol=1e-12)


def test_corrupted_kernel_fails_with_named_pair(rng):
    grid = build_grid(GridSpec(1, 4))
    k = random_kernel(grid, 1, 42)
    bad = corrupt_kernel(k, 7)
    with pytest.raises(KernelValidationError) as err:
        validate_kernel(bad)
    assert err.value.cube_pair is not None
    i, j = err.value.cube_pair
    assert 1 <= i < grid.num_boxes and 1 <= j < grid.num_boxes


def test_size_condition_violation_detected():
    grid = build_grid(GridSpec(1, 3))
    values = np.zeros((8, 8))
    values[0, 7] = 1e6  # far pair, way above 1/dist
    with pytest.raises(KernelValidationError) as err:
        validate_kernel(PerfectDyadicKernel(grid, values, 0))
    assert "size" in str(err.value)


def test_kernel_csv_roundtrip(rng):
    grid = build_grid(GridSpec(1, 3))
    k = random_kernel(grid, 1, 3)
    text = serialize.kernel_to_csv(k)
    back = serialize.kernel_from_csv(grid, text, 1)
    assert np.array_equal(back.values, k.values)
    validate_kernel(back)
