"""Stopping-rectangle families, Carleson packing and the embedding ratio.

The family is grown from the root: the stopping children of S are the
maximal boxes S' strictly inside S whose omega-average of |g| strictly
exceeds twice that of S.  Because the selected children are disjoint and
each carries more than twice the parent's average, their masses sum to at
most omega(S)/2, which packs geometrically:

    sum over stopping S inside Q of omega(S)  <=  2 omega(Q)  for every box Q.

The packing constant 2 in turn bounds the embedding ratio
sum_S omega(S) <|g|>_S^2 / ||g||^2 by 8 (dyadic Carleson embedding with
constant 4 x packing 2); the acceptance suite pre-validates that threshold
by exhaustive search at small depth before any sweep relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import Grid
from .measures import LeafMeasure

PACKING_RTOL = 1e-12
EMBEDDING_LIMIT = 8.0


@dataclass
class StoppingFamily:
    """Members, tree structure and per-member averages of |g|."""

    grid: Grid
    members: np.ndarray  # heap indices, sorted
    children: dict  # member -> list of stopping children
    stop_parent: np.ndarray  # (2N,) minimal member containing each box
    abs_average: dict  # member -> <|g|>^omega_S
    omega: LeafMeasure = field(repr=False)

    def parent_of(self, heap: int) -> int:
        """pi E: the minimal stopping rectangle containing box E."""
        return int(self.stop_parent[heap])

    def packing_slack(self):
        """(child-mass slack, worst global packing ratio).

        child slack: max over S of sum(children mass) - omega(S)/2 (should
        be <= 0 up to rounding); packing ratio: max over boxes Q with mass
        of sum of member masses inside Q over omega(Q) (should be <= 2).
        """
        bm = self.omega.box_mass
        child_slack = -np.inf
        for s, kids in self.children.items():
            if kids:
                child_slack = max(child_slack, sum(bm[k] for k in kids) - 0.5 * bm[s])
        if child_slack == -np.inf:
            child_slack = 0.0
        stop_mass = np.zeros(self.grid.num_boxes)
        stop_mass[self.members] = bm[self.members]
        total = _member_subtree_sums(self.grid, stop_mass)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(bm[1:] > 0, total[1:] / np.where(bm[1:] > 0, bm[1:], 1.0), 0.0)
        return float(child_slack), float(np.max(ratios))

    def packing_ok(self) -> bool:
        child_slack, ratio = self.packing_slack()
        scale = self.omega.total
        return child_slack <= PACKING_RTOL * scale and ratio <= 2.0 + PACKING_RTOL


def _member_subtree_sums(grid: Grid, node_values: np.ndarray) -> np.ndarray:
    """out[H] = sum of node_values over all boxes inside box H (H included)."""
    out = node_values.copy()
    for h in range(grid.num_boxes - 1, 1, -2):
        out[h >> 1] += out[h] + out[h - 1]
    return out


def build_stopping_family(g_values: np.ndarray, omega: LeafMeasure) -> StoppingFamily:
    """Iterated stopping construction for <|g|> with doubling threshold.

    Zero-mass boxes are never selected; the inequality is strict, so ties at
    exactly twice the average do not stop.
    """
    grid = omega.grid
    bm = omega.box_mass
    absint = _kernels.box_sums(np.abs(np.asarray(g_values, dtype=np.float64)) * omega.masses)
    nd = grid.tree_depth

    def avg(h):
        return absint[h] / bm[h] if bm[h] > 0 else 0.0

    members = [1]
    children = {1: []}
    queue = [1]
    while queue:
        s = queue.pop()
        threshold = 2.0 * avg(s)
        stack = [2 * s, 2 * s + 1] if grid.box_depth[s] < nd else []
        kids = []
        while stack:
            b = stack.pop()
            if bm[b] == 0.0:
                continue
            if avg(b) > threshold:
                kids.append(b)
                continue  # maximality: do not descend below a stopping child
            if grid.box_depth[b] < nd:
                stack.extend((2 * b, 2 * b + 1))
        children[s] = sorted(kids)
        for k in kids:
            members.append(k)
            children[k] = []
            queue.append(k)

    members = np.asarray(sorted(members), dtype=np.int64)
    is_member = np.zeros(grid.num_boxes, dtype=bool)
    is_member[members] = True
    stop_parent = np.zeros(grid.num_boxes, dtype=np.int64)
    stop_parent[1] = 1
    for h in range(2, grid.num_boxes):
        stop_parent[h] = h if is_member[h] else stop_parent[h >> 1]
    averages = {int(s): float(avg(s)) for s in members}
    return StoppingFamily(grid, members, children, stop_parent, averages, omega)


def carleson_embedding_check(family: StoppingFamily, g_values: np.ndarray,
                             omega: LeafMeasure) -> float:
    """sum_S omega(S) <|g|>_S^2 / ||g||^2, zero when g vanishes in L^2(omega).

    Uses the family's absolute averages, which dominate the signed ones;
    `embedding_ratios` returns both.
    """
    return embedding_ratios(family, g_values, omega)["absolute"]


def embedding_ratios(family: StoppingFamily, g_values: np.ndarray,
                     omega: LeafMeasure) -> dict:
    g_values = np.asarray(g_values, dtype=np.float64)
    norm_sq = float(np.sum(omega.masses * g_values**2))
    if norm_sq == 0.0:
        return {"absolute": 0.0, "signed": 0.0}
    bm = omega.box_mass
    sints = _kernels.box_sums(g_values * omega.masses)
    abs_sum = 0.0
    signed_sum = 0.0
    for s in family.members:
        m = bm[s]
        if m == 0.0:
            continue
        abs_sum += m * family.abs_average[int(s)] ** 2
        signed_sum += m * (sints[s] / m) ** 2
    return {"absolute": abs_sum / norm_sq, "signed": signed_sum / norm_sq}
