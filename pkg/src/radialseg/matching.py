"""Assigning proposals to ground-truth instances during fitting.

Each ground-truth instance is cloned a fixed number of times before the
assignment is solved, so several proposals can train against the same
object early on instead of starving. The assignment itself is a plain
minimum-cost bipartite matching solved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SectorGrid, sectors_of_points, to_spherical
from .migration import classification_loss, coarse_loss, fine_loss
from .validation import check_mask, check_points

# Cost of pairing with a padding row/column when the matrix is not square.
# Real pair costs must stay far below this for the padding to be inert.
PAD_COST = 1e9

GT_DUPLICATION = 4


@dataclass
class ProposalState:
    """The trainable quantities of one proposal that enter match costs."""

    center: np.ndarray  # (3,)
    rays: np.ndarray  # (S,)
    deltas: np.ndarray  # (N,) one per scene point
    logits: np.ndarray  # (C + 1,) last slot = no-object


@dataclass
class MatchTarget:
    """One ground-truth instance in matchable form."""

    center: np.ndarray  # (3,)
    rays: np.ndarray  # (S,)
    fg_mask: np.ndarray  # (N,)
    class_id: int


def duplicate_targets(
    targets: list[MatchTarget], factor: int = GT_DUPLICATION
) -> list[MatchTarget]:
    """Repeat each target ``factor`` times consecutively.

    Column ``j`` of a cost matrix over the duplicated list maps back to
    original target ``j // factor``.
    """
    if factor < 1:
        raise ValueError("factor must be at least 1")
    return [t for t in targets for _ in range(factor)]


def pair_cost(
    points: np.ndarray,
    grid: SectorGrid,
    prop: ProposalState,
    target: MatchTarget,
) -> float:
    """Coarse + fine + classification cost of one proposal/target pair."""
    r = to_spherical(points, prop.center).r
    sec = sectors_of_points(points, prop.center, grid)
    coarse = coarse_loss(prop.center, prop.rays, target.center, target.rays)
    fine = fine_loss(r, prop.deltas, prop.rays[sec], target.fg_mask)
    cls = classification_loss(prop.logits, target.class_id)
    return coarse.value + fine.value + cls.value


def build_cost_matrix(
    points: np.ndarray,
    grid: SectorGrid,
    proposals: list[ProposalState],
    targets: list[MatchTarget],
) -> np.ndarray:
    """Dense pair costs, proposals as rows and targets as columns."""
    points = check_points(points)
    n = len(points)
    for t in targets:
        check_mask(t.fg_mask, n, "fg_mask")
    cost = np.empty((len(proposals), len(targets)))
    for k, prop in enumerate(proposals):
        # Radii and sectors depend only on the proposal's center, so hoist
        # them out of the target loop.
        r = to_spherical(points, prop.center).r
        sec = sectors_of_points(points, prop.center, grid)
        sector_rays = prop.rays[sec]
        for i, target in enumerate(targets):
            coarse = coarse_loss(prop.center, prop.rays, target.center, target.rays)
            fine = fine_loss(r, prop.deltas, sector_rays, target.fg_mask)
            cls = classification_loss(prop.logits, target.class_id)
            cost[k, i] = coarse.value + fine.value + cls.value
    return cost


def hungarian_solve(cost: np.ndarray) -> list[tuple[int, int]]:
    """Exact minimum-cost assignment on a rectangular cost matrix.

    Shortest-augmenting-path algorithm with row/column potentials, run on
    the matrix padded square with ``PAD_COST``. Returns (row, col) pairs
    for the real cells only, sorted by row. Ties between equal-cost
    assignments break toward lower scan indices, so identical input always
    yields the identical output.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2d matrix")
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return []
    n = max(n_rows, n_cols)
    a = np.full((n + 1, n + 1), PAD_COST)
    a[1 : n_rows + 1, 1 : n_cols + 1] = cost
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match_row = [0] * (n + 1)  # match_row[col] = row occupying col
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match_row[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match_row[j0]
            delta = inf
            j1 = -1
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = a[i0][j] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match_row[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match_row[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match_row[j0] = match_row[j1]
            j0 = j1
    pairs = []
    for j in range(1, n + 1):
        i = match_row[j]
        if 1 <= i <= n_rows and j <= n_cols:
            pairs.append((i - 1, j - 1))
    pairs.sort()
    return pairs


@dataclass
class Assignment:
    """One matched proposal with the original target it trains against."""

    proposal_idx: int
    target_idx: int
    cost: float


def assign_proposals(
    points: np.ndarray,
    grid: SectorGrid,
    proposals: list[ProposalState],
    targets: list[MatchTarget],
    duplication: int = GT_DUPLICATION,
) -> list[Assignment]:
    """Match proposals to duplicated targets, mapped back to originals."""
    if not proposals or not targets:
        return []
    dup = duplicate_targets(targets, duplication)
    cost = build_cost_matrix(points, grid, proposals, dup)
    return [
        Assignment(k, j // duplication, float(cost[k, j]))
        for k, j in hungarian_solve(cost)
    ]
