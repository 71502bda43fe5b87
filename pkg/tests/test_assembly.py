"""Mask assembly, RLE serialization, and suppression."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from radialseg import (
    Proposal,
    RadialPolygon,
    SectorGrid,
    assemble_mask,
    mask_iou,
    masks_to_labels,
    nms,
    rle_decode,
    rle_encode,
    sectors_of_points,
    to_spherical,
)


def reference_nms(proposals, conf_threshold, iou_threshold, class_aware=False):
    """Independent greedy suppression, written as the obvious double loop."""
    order = sorted(
        (i for i, p in enumerate(proposals)
         if p.confidence >= conf_threshold and p.mask.sum() > 0),
        key=lambda i: (-proposals[i].confidence, i),
    )
    kept = []
    for i in order:
        ok = True
        for j in kept:
            if class_aware and proposals[j].class_id != proposals[i].class_id:
                continue
            if mask_iou(proposals[j].mask, proposals[i].mask) >= iou_threshold:
                ok = False
                break
        if ok:
            kept.append(i)
    return [proposals[i] for i in kept]


def random_proposals(rng, n_props, n_points):
    out = []
    for _ in range(n_props):
        mask = rng.uniform(size=n_points) < rng.uniform(0.1, 0.7)
        out.append(
            Proposal(
                mask=mask,
                class_id=int(rng.integers(0, 3)),
                confidence=float(rng.uniform()),
            )
        )
    return out


def test_mask_iou_values():
    a = np.array([True, True, False, False])
    b = np.array([True, False, True, False])
    assert mask_iou(a, b) == 1.0 / 3.0
    assert mask_iou(a, a) == 1.0
    assert mask_iou(a, ~a) == 0.0
    # Two empty masks overlap nothing and unite nothing: scored 0, not 1.
    empty = np.zeros(4, dtype=bool)
    assert mask_iou(empty, empty) == 0.0
    with pytest.raises(ValueError):
        mask_iou(a, np.zeros(5, dtype=bool))


def test_rle_roundtrip_random():
    rng = np.random.default_rng(0)
    for trial in range(50):
        n = int(rng.integers(1, 200))
        mask = rng.uniform(size=n) < rng.uniform(0.05, 0.95)
        rle = rle_encode(mask)
        assert rle["size"] == n
        assert sum(rle["counts"]) == n
        assert np.array_equal(rle_decode(rle), mask)


def test_rle_conventions():
    # The first run always counts zeros, so a mask that opens with ones
    # starts its encoding with an explicit 0.
    rle = rle_encode(np.array([True, True, False]))
    assert rle["counts"] == [0, 2, 1]
    assert rle_encode(np.array([False, False]))["counts"] == [2]
    assert rle_encode(np.zeros(0, dtype=bool)) == {"size": 0, "counts": [0]}
    assert len(rle_decode({"size": 0, "counts": [0]})) == 0
    with pytest.raises(ValueError):
        rle_decode({"size": 5, "counts": [2, 2]})


def test_assemble_mask_matches_direct_computation():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(100, 3)) * 2.0
    grid = SectorGrid(4, 4)
    poly = RadialPolygon(np.array([0.2, -0.1, 0.3]), rng.uniform(0.5, 2.5, 16), grid)
    r = to_spherical(pts, poly.center).r
    sec = sectors_of_points(pts, poly.center, grid)
    assert np.array_equal(assemble_mask(pts, poly), r <= poly.rays[sec])
    deltas = rng.uniform(-0.4, 0.4, size=100)
    assert np.array_equal(
        assemble_mask(pts, poly, deltas), r + deltas <= poly.rays[sec]
    )
    with pytest.raises(ValueError):
        assemble_mask(pts, poly, np.zeros(99))


def test_assemble_mask_deltas_move_points_across_the_boundary():
    grid = SectorGrid(1, 1)
    poly = RadialPolygon(np.zeros(3), np.array([1.0]), grid)
    pts = np.array([[1.5, 0.0, 0.0], [0.5, 0.0, 0.0]])
    assert np.array_equal(assemble_mask(pts, poly), [False, True])
    # Pull the far point in, push the near point out.
    assert np.array_equal(
        assemble_mask(pts, poly, np.array([-0.6, 0.7])), [True, False]
    )


def test_nms_matches_reference():
    rng = np.random.default_rng(2)
    for trial in range(30):
        proposals = random_proposals(rng, int(rng.integers(1, 12)), 40)
        conf = float(rng.uniform(0.0, 0.6))
        iou = float(rng.uniform(0.2, 0.9))
        class_aware = bool(rng.integers(0, 2))
        got = nms(proposals, conf, iou, class_aware)
        want = reference_nms(proposals, conf, iou, class_aware)
        assert len(got) == len(want)
        for g, w in zip(got, want):
            assert g is w


def test_nms_filters_and_orders():
    base = np.zeros(10, dtype=bool)
    a = base.copy()
    a[:5] = True
    b = base.copy()
    b[:4] = True  # IoU(a, b) = 0.8
    c = base.copy()
    c[5:] = True
    empty = base.copy()
    proposals = [
        Proposal(b, 0, 0.9),
        Proposal(a, 0, 0.95),
        Proposal(c, 1, 0.5),
        Proposal(a, 0, 0.1),  # below the confidence threshold
        Proposal(empty, 0, 0.99),  # empty mask
    ]
    kept = nms(proposals, conf_threshold=0.2, iou_threshold=0.5)
    assert [p.confidence for p in kept] == [0.95, 0.5]
    # Class-aware suppression lets overlapping different-class masks coexist.
    mixed = [Proposal(a, 0, 0.9), Proposal(b, 1, 0.8)]
    assert len(nms(mixed, 0.2, 0.5, class_aware=True)) == 2
    assert len(nms(mixed, 0.2, 0.5, class_aware=False)) == 1


def test_nms_tie_breaks_by_input_order():
    mask = np.ones(5, dtype=bool)
    first = Proposal(mask, 0, 0.7)
    second = Proposal(mask, 1, 0.7)
    kept = nms([first, second], 0.2, 0.5)
    assert len(kept) == 1
    assert kept[0] is first


def test_masks_to_labels_first_wins():
    m0 = np.array([True, True, False, False])
    m1 = np.array([False, True, True, False])
    labels = masks_to_labels([m0, m1], 4)
    assert np.array_equal(labels, [0, 0, 1, -1])
    assert np.array_equal(masks_to_labels([], 3), [-1, -1, -1])


def test_proposal_n_points():
    p = Proposal(np.array([True, False, True]), 0, 0.5)
    assert p.n_points == 2
