"""Turning fitted shapes into point masks and deduplicated proposals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .detection import RadialPolygon
from .geometry import sectors_of_points, to_spherical
from .validation import check_mask, check_points

DEFAULT_CONF_THRESHOLD = 0.2
DEFAULT_NMS_IOU = 0.5


def assemble_mask(
    points: np.ndarray, poly: RadialPolygon, deltas: Optional[np.ndarray] = None
) -> np.ndarray:
    """Points whose migrated radius fits inside their sector's ray."""
    points = check_points(points)
    r = to_spherical(points, poly.center).r
    sec = sectors_of_points(points, poly.center, poly.grid)
    if deltas is not None:
        deltas = np.asarray(deltas, dtype=float).reshape(-1)
        if len(deltas) != len(points):
            raise ValueError("deltas must align with points")
        r = r + deltas
    return r <= poly.rays[sec]


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean masks; empty vs empty is 0."""
    a = np.asarray(a, dtype=bool).reshape(-1)
    b = np.asarray(b, dtype=bool).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("masks must have the same length")
    union = np.sum(a | b)
    if union == 0:
        return 0.0
    return float(np.sum(a & b) / union)


def rle_encode(mask: np.ndarray) -> dict:
    """Run-length encode a boolean mask, first run counting zeros."""
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    counts = []
    prev = False
    run = 0
    for bit in mask:
        if bit == prev:
            run += 1
        else:
            counts.append(run)
            prev = bit
            run = 1
    counts.append(run)
    return {"size": int(len(mask)), "counts": counts}


def rle_decode(rle: dict) -> np.ndarray:
    size = int(rle["size"])
    counts = rle["counts"]
    if sum(counts) != size:
        raise ValueError("run lengths do not sum to the mask size")
    out = np.zeros(size, dtype=bool)
    pos = 0
    val = False
    for c in counts:
        if val:
            out[pos : pos + c] = True
        pos += c
        val = not val
    return out


@dataclass
class Proposal:
    """One candidate instance: a point mask plus class and confidence."""

    mask: np.ndarray
    class_id: int
    confidence: float
    polygon: Optional[RadialPolygon] = None
    deltas: Optional[np.ndarray] = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)
        self.confidence = float(self.confidence)

    @property
    def n_points(self) -> int:
        return int(self.mask.sum())


def nms(
    proposals: list[Proposal],
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
    iou_threshold: float = DEFAULT_NMS_IOU,
    class_aware: bool = False,
) -> list[Proposal]:
    """Greedy non-maximum suppression over mask overlap.

    Proposals below ``conf_threshold`` or with empty masks are dropped
    first. Survivors are visited in descending confidence (ties broken by
    input order) and a proposal is suppressed when it overlaps an already
    kept one with IoU >= ``iou_threshold``. With ``class_aware`` only
    same-class pairs suppress each other. Result stays in visit order.
    """
    alive = [
        (idx, p)
        for idx, p in enumerate(proposals)
        if p.confidence >= conf_threshold and p.n_points > 0
    ]
    alive.sort(key=lambda ip: (-ip[1].confidence, ip[0]))
    kept: list[Proposal] = []
    for _, cand in alive:
        suppressed = False
        for keeper in kept:
            if class_aware and keeper.class_id != cand.class_id:
                continue
            if mask_iou(keeper.mask, cand.mask) >= iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(cand)
    return kept


def masks_to_labels(masks: list[np.ndarray], n_points: int) -> np.ndarray:
    """Flatten masks to per-point ids; later masks lose contested points."""
    labels = np.full(n_points, -1, dtype=np.int64)
    for idx, mask in enumerate(masks):
        mask = check_mask(mask, n_points, f"mask {idx}")
        labels[mask & (labels == -1)] = idx
    return labels
