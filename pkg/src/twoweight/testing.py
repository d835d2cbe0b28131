"""Exact two-weight operator norms and the Sawyer-type testing constants.

The operator norm of f -> T(sigma f) from L^2(sigma) to L^2(omega) is the
largest singular value of the whitened matrix (dense SVD up to 256 leaves,
deterministic power iteration above).  The testing constants are suprema over
boxes of the truncated grid, leaf scale included (a leaf cube is the level-1
split rectangle of its own base, so it belongs to the rectangle system as a
set):

    c1  = max_E ||1_E T(sigma 1_E)||_omega / sigma(E)^{1/2}
    c2  =  the same for T* with the measures swapped
    c3  = max |<T(sigma 1_E), 1_G>_omega| / (sigma(E) omega(G))^{1/2}
          over pairs with 2^-r |E| <= |G| <= 2^r |E| and G meeting E^(r)

plus the global (unrestricted) and cube-indexed variants.  Zero-mass boxes
are skipped.  Every constant is bounded by the operator norm, exactly; that
necessity chain is asserted by the sweep harness and the acceptance suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import NormError
from .grid import Grid
from .haar import basis, chain_table
from .operators import DyadicOperator

POWER_RTOL = 1e-10
POWER_MAX_ITERS = 10_000
DENSE_SVD_MAX_LEAVES = 256


def _power_norm(w: np.ndarray, rtol: float = POWER_RTOL,
                max_iters: int = POWER_MAX_ITERS) -> float:
    """Largest singular value by power iteration on the normal map.

    Deterministic starts: the all-ones vector, then a fixed-seed draw if the
    first stagnates near zero.  Certified by the normal-equation residual.
    """
    n = w.shape[0]
    best = 0.0
    certified = False
    rng = np.random.default_rng(0)
    for v in (np.ones(n), rng.standard_normal(n)):
        v = v / np.linalg.norm(v)
        est = 0.0
        ok = False
        for _ in range(max_iters):
            u = w @ v
            new = np.linalg.norm(u)
            if new == 0.0:
                est, ok = 0.0, True
                break
            v_next = w.T @ u  # = W^T W v, so the residual below is free
            resid = np.linalg.norm(v_next - new**2 * v)
            nn = np.linalg.norm(v_next)
            if nn == 0.0:
                est, ok = new, True
                break
            v = v_next / nn
            if abs(new - est) <= rtol * new and resid <= 1e-7 * new**2:
                est, ok = new, True
                break
            est = new
        if est >= best:
            best, certified = est, ok
    if not certified:  # pathological spectrum; fall back to the dense oracle
        best = np.linalg.svd(w, compute_uv=False)[0]
    return float(best)


def operator_norm(t: DyadicOperator) -> float:
    """||T(sigma .)||_{L^2(sigma) -> L^2(omega)}, exact on charged leaves."""
    if t.sigma.total == 0.0 or t.omega.total == 0.0:
        raise NormError("operator norm undefined: a side carries no mass")
    if t.grid.num_leaves <= DENSE_SVD_MAX_LEAVES:
        return float(np.linalg.svd(t.w, compute_uv=False)[0])
    return _power_norm(t.w)


def admissible_pairs(grid: Grid, r: int):
    """CSR pair list: for every box E the partners G with volume within
    2^{+-r} of E and G meeting the clipped r-ancestor of E."""
    depth = grid.box_depth
    nd = grid.tree_depth
    offsets = np.zeros(grid.num_boxes + 1, dtype=np.int64)
    partners = []
    for e in range(1, grid.num_boxes):
        de = depth[e]
        anc = max(e >> r, 1)
        da = int(depth[anc])
        for m in range(max(da, de - r), min(nd, de + r) + 1):
            gap = m - da
            partners.extend(range(anc << gap, (anc + 1) << gap))
        a = anc
        while a > 1:
            a >>= 1
            if depth[a] >= de - r:
                partners.append(a)
        offsets[e + 1] = len(partners)
    return offsets, np.asarray(partners, dtype=np.int64)


def _indicator_pass(wt, in_measure, out_measure, pair_offsets, pair_partner):
    """Restricted/global image norms and pairings for all boxes at once.

    wt is the transposed whitened matrix of the map being probed (input
    slot major), so chain combinations read contiguous rows.
    """
    grid = in_measure.grid
    idx, val = chain_table(in_measure)
    ob = basis(out_measure)
    return _kernels.testing_images(
        wt, idx, val, ob.alpha, ob.beta, ob.inv_sqrt_total,
        out_measure.masses, grid.box_lo, grid.box_hi,
        pair_offsets, pair_partner,
    )


def _pair_mask(grid: Grid, boxes_e: np.ndarray, partners: np.ndarray, r: int):
    """Admissibility at radius r of pairs drawn from a wider enumeration."""
    depth = grid.box_depth
    de, dg = depth[boxes_e], depth[partners]
    window = np.abs(de - dg) <= r
    anc = np.maximum(boxes_e >> r, 1)
    gap = dg - depth[anc]
    meets = np.where(
        gap >= 0,
        (partners >> np.maximum(gap, 0)) == anc,
        (anc >> np.maximum(-gap, 0)) == partners,
    )
    return window & meets


@dataclass
class TestingReport:
    """All testing constants of one operator, with witnesses and ratios."""

    norm: float
    c1: float
    c2: float
    c3: float
    c1_global: float
    c2_global: float
    c1_cube: float
    c2_cube: float
    c3_cube: float
    r_used: int
    ratio_sum: float
    ratio_max: float
    witnesses: dict = field(default_factory=dict)
    wall_ms: float = 0.0
    c3_extra: dict = field(default_factory=dict)  # radius -> c3 at that radius

    def as_dict(self) -> dict:
        return {
            "norm": self.norm,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "c1_global": self.c1_global,
            "c2_global": self.c2_global,
            "c1_cube": self.c1_cube,
            "c2_cube": self.c2_cube,
            "c3_cube": self.c3_cube,
            "r_used": self.r_used,
            "ratio_sum": self.ratio_sum,
            "ratio_max": self.ratio_max,
            "witnesses": {k: list(map(int, v)) if isinstance(v, tuple) else int(v)
                          for k, v in self.witnesses.items()},
            "wall_ms": self.wall_ms,
        }


def _ratio_max(num: np.ndarray, den: np.ndarray, subset=None):
    """(max of sqrt(num)/sqrt(den) over den > 0, witness index)."""
    ratios = np.zeros_like(num)
    mask = den > 0
    if subset is not None:
        mask = mask & subset
    ratios[mask] = np.sqrt(num[mask]) / np.sqrt(den[mask])
    if not np.any(mask):
        return 0.0, 0
    arg = int(np.argmax(ratios))
    return float(ratios[arg]), arg


def local_testing(t: DyadicOperator):
    """(c1, c2): restricted indicator testing constants."""
    rep = testing_report(t, r=0, norm=False)
    return rep.c1, rep.c2


def global_testing(t: DyadicOperator):
    """(c1_global, c2_global): unrestricted variants; dominate the local ones."""
    rep = testing_report(t, r=0, norm=False)
    return rep.c1_global, rep.c2_global


def weak_boundedness(t: DyadicOperator, r: int) -> float:
    """c3 at pair-enumeration radius r (forward pass only)."""
    grid = t.grid
    offsets, partners = admissible_pairs(grid, r)
    wt = np.ascontiguousarray(t.w.T)
    _, _, pair_vals = _indicator_pass(wt, t.sigma, t.omega, offsets, partners)
    boxes_e = np.repeat(np.arange(grid.num_boxes), np.diff(offsets))
    c3, _ = _pair_sup(pair_vals, t.sigma.box_mass[boxes_e], t.omega.box_mass[partners],
                      boxes_e, partners)
    return c3


def cube_testing(t: DyadicOperator, r: int):
    """(c1_cube, c2_cube, c3_cube): suprema over dyadic cubes only."""
    rep = testing_report(t, r=r, norm=False)
    return rep.c1_cube, rep.c2_cube, rep.c3_cube


def _pair_sup(pair_vals, den_e, den_g, boxes_e, partners, subset=None):
    den = den_e * den_g
    ok = den > 0
    if subset is not None:
        ok = ok & subset
    if not np.any(ok):
        return 0.0, (0, 0)
    ratios = np.zeros_like(pair_vals)
    ratios[ok] = np.abs(pair_vals[ok]) / np.sqrt(den[ok])
    arg = int(np.argmax(ratios))
    return float(ratios[arg]), (int(boxes_e[arg]), int(partners[arg]))


def testing_report(t: DyadicOperator, r: int = None, norm: bool = True,
                   extra_c3_radii=()) -> TestingReport:
    """Full testing profile; r defaults to the operator's measured radius.

    With norm=False the (possibly expensive) operator norm and ratio fields
    are skipped.  extra_c3_radii requests c3 at further enumeration radii
    from the same image pass (report.c3_extra).
    """
    start = time.perf_counter()
    if r is None:
        from .localization import ewl_radius

        r = ewl_radius(t)
        if r is None:
            r = t.grid.tree_depth
    grid = t.grid
    sig_mass = t.sigma.box_mass
    om_mass = t.omega.box_mass

    enum_r = max([r, *extra_c3_radii])
    offsets, partners = admissible_pairs(grid, enum_r)
    wt = np.ascontiguousarray(t.w.T)
    restricted, glob, pair_vals = _indicator_pass(wt, t.sigma, t.omega, offsets, partners)
    empty = (np.zeros(grid.num_boxes + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    restricted2, glob2, _ = _indicator_pass(t.w, t.omega, t.sigma, *empty)

    c1, w1 = _ratio_max(restricted, sig_mass)
    c1g, w1g = _ratio_max(glob, sig_mass)
    c2, w2 = _ratio_max(restricted2, om_mass)
    c2g, w2g = _ratio_max(glob2, om_mass)

    cube_mask = grid.box_depth % grid.dimension == 0
    c1c, w1c = _ratio_max(restricted, sig_mass, cube_mask)
    c2c, w2c = _ratio_max(restricted2, om_mass, cube_mask)

    # pair constants: normalize |<T(sigma 1_E), 1_G>| by sqrt(sigma(E) omega(G))
    boxes_e = np.repeat(np.arange(grid.num_boxes), np.diff(offsets))
    den_e, den_g = sig_mass[boxes_e], om_mass[partners]
    at_r = _pair_mask(grid, boxes_e, partners, r) if enum_r > r else None
    c3, w3 = _pair_sup(pair_vals, den_e, den_g, boxes_e, partners, at_r)
    c3_extra = {}
    for rr in extra_c3_radii:
        sub = _pair_mask(grid, boxes_e, partners, rr) if rr < enum_r else None
        c3_extra[int(rr)], _ = _pair_sup(pair_vals, den_e, den_g, boxes_e, partners, sub)
    cubes = cube_mask[boxes_e] & cube_mask[partners]
    if at_r is not None:
        cubes = cubes & at_r
    c3c, w3c = _pair_sup(pair_vals, den_e, den_g, boxes_e, partners, cubes)

    nrm = operator_norm(t) if norm else 0.0
    csum = c1 + c2 + c3
    report = TestingReport(
        norm=nrm, c1=c1, c2=c2, c3=c3, c1_global=c1g, c2_global=c2g,
        c1_cube=c1c, c2_cube=c2c, c3_cube=c3c, r_used=int(r),
        ratio_sum=(nrm / csum if csum > 0 else 0.0),
        ratio_max=(max(c1, c2, c3) / nrm if nrm > 0 else 0.0),
        witnesses={
            "c1": w1, "c2": w2, "c3": w3, "c1_global": w1g, "c2_global": w2g,
            "c1_cube": w1c, "c2_cube": w2c, "c3_cube": w3c,
        },
        c3_extra=c3_extra,
    )
    report.wall_ms = (time.perf_counter() - start) * 1e3
    return report
