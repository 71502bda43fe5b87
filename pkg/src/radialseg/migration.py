"""Point migration and the losses that train it.

Each point near a proposal gets a learned radial offset (its migration
delta). The point's migrated radius is ``r + delta``; it counts as inside
the proposal when that migrated radius is at most the ray of its sector.
Deltas give the otherwise rigid radial polygon a per-point escape hatch:
foreground points just outside the boundary can tuck themselves in, and
background clutter just inside can push itself out.

Losses here return their value together with analytic gradients for
exactly the quantities they are allowed to move. Sector assignment, ray
lookups, and the radius each point was observed at are treated as fixed
inputs; only the coarse loss moves the center and rays, and only the
migration losses move the deltas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import sectors_of_points, to_spherical
from .detection import RadialPolygon
from .validation import check_mask, check_points, check_same_length


@dataclass
class PointPartition:
    """Outcome of migrated containment against ground-truth membership."""

    tp: np.ndarray  # foreground, inside
    fn: np.ndarray  # foreground, outside
    fp: np.ndarray  # background, inside
    tn: np.ndarray  # background, outside

    @property
    def inside(self) -> np.ndarray:
        return self.tp | self.fp

    @property
    def miss(self) -> np.ndarray:
        return self.fn | self.fp

    @property
    def n_miss(self) -> int:
        return int(self.miss.sum())

    @property
    def n_tp(self) -> int:
        return int(self.tp.sum())


def classify_points(
    radii: np.ndarray,
    deltas: np.ndarray,
    sector_rays: np.ndarray,
    fg_mask: np.ndarray,
) -> PointPartition:
    """Partition points by migrated containment (``r + delta <= ray``)."""
    radii = np.asarray(radii, dtype=float).reshape(-1)
    deltas = np.asarray(deltas, dtype=float).reshape(-1)
    sector_rays = np.asarray(sector_rays, dtype=float).reshape(-1)
    fg = check_mask(fg_mask, len(radii), "fg_mask")
    check_same_length(radii=radii, deltas=deltas, sector_rays=sector_rays)
    inside = radii + deltas <= sector_rays
    return PointPartition(
        tp=fg & inside, fn=fg & ~inside, fp=~fg & inside, tn=~fg & ~inside
    )


def partition_for_polygon(
    points: np.ndarray,
    poly: RadialPolygon,
    deltas: np.ndarray,
    fg_mask: np.ndarray,
) -> PointPartition:
    """Classify raw points against a polygon, deltas applied radially."""
    points = check_points(points)
    r = to_spherical(points, poly.center).r
    sec = sectors_of_points(points, poly.center, poly.grid)
    return classify_points(r, deltas, poly.rays[sec], fg_mask)


def migrated_positions(
    points: np.ndarray, center: np.ndarray, deltas: np.ndarray
) -> np.ndarray:
    """Move each point radially by its delta (points at the center stay put)."""
    points = check_points(points)
    deltas = np.asarray(deltas, dtype=float).reshape(-1)
    d = points - np.asarray(center, dtype=float).reshape(3)
    r = np.sqrt(np.sum(d * d, axis=1))
    scale = np.where(r > 0, (r + deltas) / np.where(r > 0, r, 1.0), 1.0)
    return center + d * scale[:, None]


@dataclass
class CoarseLoss:
    """Shape regression loss and its subgradients."""

    value: float
    ray_term: float  # mean absolute ray error
    center_term: float  # L1 center error
    grad_rays: np.ndarray
    grad_center: np.ndarray


def coarse_loss(
    pred_center: np.ndarray,
    pred_rays: np.ndarray,
    gt_center: np.ndarray,
    gt_rays: np.ndarray,
) -> CoarseLoss:
    """Mean absolute ray error plus L1 center error, sign subgradients.

    The subgradient of ``|x|`` at 0 is taken as 0.
    """
    pred_center = np.asarray(pred_center, dtype=float).reshape(3)
    gt_center = np.asarray(gt_center, dtype=float).reshape(3)
    pred_rays = np.asarray(pred_rays, dtype=float).reshape(-1)
    gt_rays = np.asarray(gt_rays, dtype=float).reshape(-1)
    if pred_rays.shape != gt_rays.shape:
        raise ValueError("predicted and target rays must have the same length")
    ray_diff = pred_rays - gt_rays
    center_diff = pred_center - gt_center
    ray_term = float(np.mean(np.abs(ray_diff)))
    center_term = float(np.sum(np.abs(center_diff)))
    return CoarseLoss(
        value=ray_term + center_term,
        ray_term=ray_term,
        center_term=center_term,
        grad_rays=np.sign(ray_diff) / len(pred_rays),
        grad_center=np.sign(center_diff),
    )


@dataclass
class MigrationLoss:
    """Loss over migration deltas plus its gradient."""

    value: float
    grad_deltas: np.ndarray


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def misclassification_loss(
    radii: np.ndarray,
    deltas: np.ndarray,
    sector_rays: np.ndarray,
    partition: PointPartition,
    invert_signs: bool = False,
) -> MigrationLoss:
    """Softplus penalty on misclassified points' signed boundary margins.

    Each miss contributes ``log(1 + exp(y * tanh(r + delta - ray)))`` with
    ``y = +1`` for missed foreground and ``y = -1`` for captured
    background, so the gradient pulls missed foreground inward and pushes
    captured background out. ``invert_signs=True`` flips both labels,
    which drives every miss deeper into its mistake; it exists only for
    ablation studies. Zero misses give a zero loss and zero gradient.
    """
    radii = np.asarray(radii, dtype=float).reshape(-1)
    deltas = np.asarray(deltas, dtype=float).reshape(-1)
    sector_rays = np.asarray(sector_rays, dtype=float).reshape(-1)
    grad = np.zeros_like(deltas)
    n_miss = partition.n_miss
    if n_miss == 0:
        return MigrationLoss(0.0, grad)
    y = np.zeros(len(radii))
    y[partition.fn] = 1.0
    y[partition.fp] = -1.0
    if invert_signs:
        y = -y
    miss = partition.miss
    u = radii[miss] + deltas[miss] - sector_rays[miss]
    t = np.tanh(u)
    ym = y[miss]
    value = float(np.sum(np.log1p(np.exp(ym * t)))) / n_miss
    grad[miss] = _sigmoid(ym * t) * ym * (1.0 - t * t) / n_miss
    return MigrationLoss(value, grad)


def cohesion_loss(
    radii: np.ndarray, deltas: np.ndarray, partition: PointPartition
) -> MigrationLoss:
    """Softplus pull of captured foreground toward the center.

    Each true positive contributes ``log(1 + exp(tanh(r + delta)))``,
    shrinking its migrated radius so the kept points condense instead of
    loitering at the boundary. Zero true positives give zero loss.
    """
    radii = np.asarray(radii, dtype=float).reshape(-1)
    deltas = np.asarray(deltas, dtype=float).reshape(-1)
    grad = np.zeros_like(deltas)
    n_tp = partition.n_tp
    if n_tp == 0:
        return MigrationLoss(0.0, grad)
    tp = partition.tp
    t = np.tanh(radii[tp] + deltas[tp])
    value = float(np.sum(np.log1p(np.exp(t)))) / n_tp
    grad[tp] = _sigmoid(t) * (1.0 - t * t) / n_tp
    return MigrationLoss(value, grad)


def fine_loss(
    radii: np.ndarray,
    deltas: np.ndarray,
    sector_rays: np.ndarray,
    fg_mask: np.ndarray,
    invert_signs: bool = False,
) -> MigrationLoss:
    """Misclassification plus cohesion, classified from the same deltas."""
    part = classify_points(radii, deltas, sector_rays, fg_mask)
    mc = misclassification_loss(radii, deltas, sector_rays, part, invert_signs)
    sc = cohesion_loss(radii, deltas, part)
    return MigrationLoss(mc.value + sc.value, mc.grad_deltas + sc.grad_deltas)


@dataclass
class ClassificationLoss:
    value: float
    grad_logits: np.ndarray


def classification_loss(logits: np.ndarray, target: int) -> ClassificationLoss:
    """Softmax cross-entropy against one target class."""
    logits = np.asarray(logits, dtype=float).reshape(-1)
    if not 0 <= target < len(logits):
        raise ValueError(f"target {target} out of range for {len(logits)} classes")
    shifted = logits - logits.max()
    log_z = np.log(np.sum(np.exp(shifted)))
    probs = np.exp(shifted - log_z)
    grad = probs.copy()
    grad[target] -= 1.0
    return ClassificationLoss(float(log_z - shifted[target]), grad)


@dataclass
class ConfidenceLoss:
    value: float
    grad_conf: float


def confidence_loss(conf: float, target_iou: float) -> ConfidenceLoss:
    """Squared error between predicted confidence and achieved mask overlap."""
    diff = float(conf) - float(target_iou)
    return ConfidenceLoss(diff * diff, 2.0 * diff)
