"""Assignment costs and the exact bipartite matcher."""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from radialseg import (
    MatchTarget,
    ProposalState,
    SectorGrid,
    assign_proposals,
    build_cost_matrix,
    classification_loss,
    coarse_loss,
    duplicate_targets,
    fine_loss,
    hungarian_solve,
    sectors_of_points,
    to_spherical,
)
from radialseg.matching import pair_cost


def pairs_cost(cost, pairs):
    """Cost of an assignment, summed in row order so ties in the float
    accumulation order cannot split two views of the same assignment."""
    total = 0.0
    for i, j in sorted(pairs):
        total += cost[i, j]
    return total


def brute_force_min_cost(cost):
    """Try every assignment of the smaller side; the exponential oracle."""
    n_rows, n_cols = cost.shape
    best = None
    if n_rows <= n_cols:
        candidates = (
            list(enumerate(perm))
            for perm in itertools.permutations(range(n_cols), n_rows)
        )
    else:
        candidates = (
            [(i, j) for j, i in enumerate(perm)]
            for perm in itertools.permutations(range(n_rows), n_cols)
        )
    for pairs in candidates:
        total = pairs_cost(cost, pairs)
        if best is None or total < best:
            best = total
    return best


def random_state(rng, grid, n_points):
    return ProposalState(
        center=rng.normal(size=3),
        rays=rng.uniform(0.5, 2.0, grid.n_sectors),
        deltas=rng.uniform(-0.2, 0.2, n_points),
        logits=rng.normal(size=4),
    )


def random_target(rng, grid, n_points):
    return MatchTarget(
        center=rng.normal(size=3),
        rays=rng.uniform(0.5, 2.0, grid.n_sectors),
        fg_mask=rng.uniform(size=n_points) < 0.4,
        class_id=int(rng.integers(0, 3)),
    )


def test_hungarian_matches_brute_force():
    rng = np.random.default_rng(0)
    for trial in range(60):
        n_rows = int(rng.integers(1, 7))
        n_cols = int(rng.integers(1, 7))
        cost = rng.uniform(0.0, 10.0, size=(n_rows, n_cols))
        pairs = hungarian_solve(cost)
        assert len(pairs) == min(n_rows, n_cols)
        rows = [i for i, _ in pairs]
        cols = [j for _, j in pairs]
        assert len(set(rows)) == len(rows)
        assert len(set(cols)) == len(cols)
        assert pairs_cost(cost, pairs) == brute_force_min_cost(cost)


def test_hungarian_known_case():
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    assert hungarian_solve(cost) == [(0, 1), (1, 0), (2, 2)]


def test_hungarian_rectangular_sides():
    cost = np.array([[1.0, 9.0, 9.0, 0.5]])
    assert hungarian_solve(cost) == [(0, 3)]
    assert hungarian_solve(cost.T) == [(3, 0)]


def test_hungarian_deterministic_under_ties():
    cost = np.ones((4, 4))
    first = hungarian_solve(cost)
    second = hungarian_solve(cost)
    assert first == second
    assert pairs_cost(cost, first) == 4.0


def test_hungarian_edge_shapes():
    assert hungarian_solve(np.zeros((0, 3))) == []
    assert hungarian_solve(np.zeros((3, 0))) == []
    assert hungarian_solve(np.array([[7.0]])) == [(0, 0)]
    with pytest.raises(ValueError):
        hungarian_solve(np.zeros(3))


def test_duplicate_targets_layout():
    rng = np.random.default_rng(1)
    grid = SectorGrid(2, 2)
    targets = [random_target(rng, grid, 10) for _ in range(3)]
    dup = duplicate_targets(targets, 4)
    assert len(dup) == 12
    for j, t in enumerate(dup):
        assert t is targets[j // 4]
    with pytest.raises(ValueError):
        duplicate_targets(targets, 0)


def test_pair_cost_composition():
    rng = np.random.default_rng(2)
    grid = SectorGrid(3, 3)
    pts = rng.normal(size=(50, 3)) * 2.0
    prop = random_state(rng, grid, 50)
    target = random_target(rng, grid, 50)
    got = pair_cost(pts, grid, prop, target)
    r = to_spherical(pts, prop.center).r
    sec = sectors_of_points(pts, prop.center, grid)
    want = (
        coarse_loss(prop.center, prop.rays, target.center, target.rays).value
        + fine_loss(r, prop.deltas, prop.rays[sec], target.fg_mask).value
        + classification_loss(prop.logits, target.class_id).value
    )
    assert_allclose(got, want, rtol=1e-12)


def test_build_cost_matrix_entries():
    rng = np.random.default_rng(3)
    grid = SectorGrid(2, 3)
    pts = rng.normal(size=(40, 3))
    props = [random_state(rng, grid, 40) for _ in range(3)]
    targets = [random_target(rng, grid, 40) for _ in range(2)]
    cost = build_cost_matrix(pts, grid, props, targets)
    assert cost.shape == (3, 2)
    for k, prop in enumerate(props):
        for i, target in enumerate(targets):
            assert_allclose(cost[k, i], pair_cost(pts, grid, prop, target), rtol=1e-12)


def test_assign_proposals_maps_duplicates_back():
    rng = np.random.default_rng(4)
    grid = SectorGrid(3, 3)
    # Two well-separated clusters; two proposals parked on each center.
    a = rng.normal(size=(30, 3)) * 0.3 + np.array([5.0, 0.0, 0.0])
    b = rng.normal(size=(30, 3)) * 0.3 + np.array([-5.0, 0.0, 0.0])
    pts = np.concatenate([a, b])
    fg_a = np.arange(60) < 30
    targets = [
        MatchTarget(a.mean(axis=0), np.full(9, 0.8), fg_a, 0),
        MatchTarget(b.mean(axis=0), np.full(9, 0.8), ~fg_a, 1),
    ]
    props = []
    for center in (a.mean(axis=0), a.mean(axis=0), b.mean(axis=0), b.mean(axis=0)):
        props.append(
            ProposalState(
                center=center + rng.normal(scale=0.05, size=3),
                rays=np.full(9, 0.8),
                deltas=np.zeros(60),
                logits=np.zeros(4),
            )
        )
    assignment = assign_proposals(pts, grid, props, targets, duplication=4)
    assert len(assignment) == 4
    by_proposal = {a_.proposal_idx: a_.target_idx for a_ in assignment}
    # Each proposal trains against the cluster it sits on.
    assert by_proposal[0] == 0 and by_proposal[1] == 0
    assert by_proposal[2] == 1 and by_proposal[3] == 1
    for a_ in assignment:
        assert 0 <= a_.target_idx < len(targets)
    assert assign_proposals(pts, grid, [], targets) == []
    assert assign_proposals(pts, grid, props, []) == []


def test_assignment_is_deterministic():
    rng = np.random.default_rng(5)
    grid = SectorGrid(2, 2)
    pts = rng.normal(size=(25, 3))
    props = [random_state(rng, grid, 25) for _ in range(5)]
    targets = [random_target(rng, grid, 25) for _ in range(2)]
    first = assign_proposals(pts, grid, props, targets)
    second = assign_proposals(pts, grid, props, targets)
    assert [(a.proposal_idx, a.target_idx, a.cost) for a in first] == [
        (a.proposal_idx, a.target_idx, a.cost) for a in second
    ]
