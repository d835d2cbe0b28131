"""Localization radius classifier and the well-localized bridge."""

import pytest

from twoweight import GridSpec, build_grid
from twoweight.localization import NOT_LOCALIZED, ewl_radius, wl_check
from twoweight.operators import (
    CoefficientSequence,
    DyadicOperator,
    haar_shift,
    martingale_transform,
    paraproduct,
    random_ewl,
)

from conftest import random_measure


def pair(rng, grid, zero_fraction=0.0):
    return (random_measure(grid, rng, zero_fraction), random_measure(grid, rng, zero_fraction))


def test_known_radii_classic_families(rng):
    grid = build_grid(GridSpec(1, 4))
    sigma, omega = pair(rng, grid)
    b = CoefficientSequence.random(grid, rng)
    t = martingale_transform(b, sigma, omega)
    assert ewl_radius(t) == 0
    assert wl_check(t, 1)
    s = haar_shift(b, sigma, omega)
    assert ewl_radius(s) == 1
    assert not wl_check(s, 1)
    assert wl_check(s, 2)
    p = paraproduct(b, sigma, omega)
    assert ewl_radius(p) == 0
    assert wl_check(p, 1)


def test_dense_random_operator_degenerate_radius(rng):
    # generic full supports force the maximal radius the truncated grid allows
    grid = build_grid(GridSpec(1, 4))
    sigma, omega = pair(rng, grid)
    w = rng.standard_normal((grid.num_leaves, grid.num_leaves))
    t = DyadicOperator(grid, sigma, omega, w)
    assert ewl_radius(t) == grid.tree_depth - 1
    assert ewl_radius(t) is not NOT_LOCALIZED


def test_wl_check_monotone_in_r(rng):
    grid = build_grid(GridSpec(1, 4))
    sigma, omega = pair(rng, grid)
    t = random_ewl(1, sigma, omega, 3)
    results = [wl_check(t, r) for r in range(1, grid.tree_depth + 1)]
    assert results == sorted(results)  # once true, stays true


@pytest.mark.parametrize("r", [0, 1, 2])
def test_bridge_both_directions(r, rng):
    grid = build_grid(GridSpec(1, 5))
    sigma, omega = pair(rng, grid, zero_fraction=0.15)
    for seed in range(10):
        t = random_ewl(r, sigma, omega, seed)
        r0 = ewl_radius(t)
        assert r0 <= r
        assert wl_check(t, r0 + 1)
        for rr in range(1, grid.tree_depth + 1):
            if wl_check(t, rr):
                assert r0 <= rr
                break


def test_bridge_in_two_dimensions(rng):
    grid = build_grid(GridSpec(2, 2))
    sigma, omega = pair(rng, grid)
    for seed in range(5):
        t = random_ewl(1, sigma, omega, seed)
        r0 = ewl_radius(t)
        assert r0 <= 1
        assert wl_check(t, r0 + 1)


def test_wl_check_rejects_r_zero(rng):
    grid = build_grid(GridSpec(1, 2))
    sigma, omega = pair(rng, grid)
    with pytest.raises(ValueError):
        wl_check(martingale_transform(CoefficientSequence.constant(grid, 1.0),
                                      sigma, omega), 0)
