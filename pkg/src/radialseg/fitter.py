"""Direct optimization of radial polygon proposals on a labeled scene.

This plays the role a trained network would: it owns a bank of proposals
(center, per-sector ray lengths, per-point migration deltas, class logits
with a trailing no-object slot, and a confidence pre-activation) and
improves them by plain gradient descent on the combined loss. Proposals
are re-assigned to ground truth every ``rematch_interval`` iterations via
exact matching over duplicated targets.

Each gradient step freezes the geometry a loss is not allowed to move:
migration losses see per-point radii and sector rays as constants and
push only the deltas, the confidence target is the current mask overlap,
and only the coarse loss moves centers and rays. ``step_constants``
captures exactly those frozen quantities, so ``total_loss`` is a smooth
function of the parameters it does differentiate and its analytic
gradients can be checked by finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import (
    DEFAULT_CONF_THRESHOLD,
    DEFAULT_NMS_IOU,
    Proposal,
    nms,
)
from .detection import RadialPolygon, instance_center, ray_targets
from .geometry import SectorGrid, find_sector, to_spherical
from .matching import GT_DUPLICATION, Assignment, MatchTarget, assign_proposals
from .validation import check_labels, check_points

VARIANTS = ("full", "mc_only", "rid_only")


@dataclass
class FitConfig:
    """Optimization settings; the defaults fit small synthetic scenes."""

    grid: SectorGrid = field(default_factory=lambda: SectorGrid(5, 5))
    # None: one proposal per duplicated target slot, so no target can be
    # starved by others hogging all slots in the assignment.
    n_proposals: Optional[int] = None
    iterations: int = 400
    lr: float = 0.3
    anneal: bool = True  # cosine decay of the learning rate to 0
    rematch_interval: int = 25
    gt_duplication: int = GT_DUPLICATION
    lambda_cls: float = 0.5
    lambda_conf: float = 0.5
    lambda_coarse: float = 1.0
    lambda_fine: float = 1.0
    n_classes: int = 3
    init_neighbors: int = 64  # neighborhood for the initial ray length
    conf_threshold: float = DEFAULT_CONF_THRESHOLD
    nms_iou: float = DEFAULT_NMS_IOU
    variant: str = "full"  # which migration losses train: see VARIANTS

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.iterations < 1 or self.rematch_interval < 1:
            raise ValueError("iterations and rematch_interval must be positive")

    @property
    def no_object_class(self) -> int:
        return self.n_classes


@dataclass
class FitParams:
    """The trainable state of every proposal, stacked."""

    centers: np.ndarray  # (K, 3)
    log_rays: np.ndarray  # (K, S); rays = exp(log_rays) stay positive
    deltas: np.ndarray  # (K, N)
    logits: np.ndarray  # (K, n_classes + 1)
    conf_raw: np.ndarray  # (K,); confidence = sigmoid(conf_raw)

    def copy(self) -> "FitParams":
        return FitParams(
            self.centers.copy(),
            self.log_rays.copy(),
            self.deltas.copy(),
            self.logits.copy(),
            self.conf_raw.copy(),
        )

    def zeros_like(self) -> "FitParams":
        return FitParams(
            np.zeros_like(self.centers),
            np.zeros_like(self.log_rays),
            np.zeros_like(self.deltas),
            np.zeros_like(self.logits),
            np.zeros_like(self.conf_raw),
        )


def pack_params(p: FitParams) -> np.ndarray:
    """Flatten all parameters into one vector (for finite differences)."""
    return np.concatenate(
        [
            p.centers.ravel(),
            p.log_rays.ravel(),
            p.deltas.ravel(),
            p.logits.ravel(),
            p.conf_raw.ravel(),
        ]
    )


def unpack_params(vec: np.ndarray, template: FitParams) -> FitParams:
    """Inverse of ``pack_params`` using the template's shapes."""
    vec = np.asarray(vec, dtype=float)
    arrays = []
    pos = 0
    for ref in (
        template.centers,
        template.log_rays,
        template.deltas,
        template.logits,
        template.conf_raw,
    ):
        arrays.append(vec[pos : pos + ref.size].reshape(ref.shape))
        pos += ref.size
    if pos != vec.size:
        raise ValueError("vector length does not match the template")
    return FitParams(*arrays)


@dataclass
class StepConstants:
    """Quantities one gradient step treats as fixed."""

    radii: np.ndarray  # (K, N) distance of each point from each center
    sectors: np.ndarray  # (K, N) sector of each point around each center
    sector_rays: np.ndarray  # (K, N) current ray of that sector
    fg: np.ndarray  # (K, N) matched target membership, False if unmatched
    matched: np.ndarray  # (K,)
    target_class: np.ndarray  # (K,) class id, no-object where unmatched
    gt_centers: np.ndarray  # (K, 3) zeros where unmatched
    gt_rays: np.ndarray  # (K, S) ones where unmatched
    iou_targets: np.ndarray  # (K,) current mask overlap with the target


def step_constants(
    points: np.ndarray,
    params: FitParams,
    targets: list[MatchTarget],
    assignment: list[Assignment],
    cfg: FitConfig,
) -> StepConstants:
    k, n = params.deltas.shape
    d = points[None, :, :] - params.centers[:, None, :]
    sph = to_spherical(d)
    sectors = find_sector(sph.theta, sph.phi, cfg.grid)
    rays = np.exp(params.log_rays)
    sector_rays = np.take_along_axis(rays, sectors, axis=1)
    fg = np.zeros((k, n), dtype=bool)
    matched = np.zeros(k, dtype=bool)
    target_class = np.full(k, cfg.no_object_class, dtype=np.int64)
    gt_centers = np.zeros((k, 3))
    gt_rays = np.ones((k, cfg.grid.n_sectors))
    for a in assignment:
        t = targets[a.target_idx]
        fg[a.proposal_idx] = t.fg_mask
        matched[a.proposal_idx] = True
        target_class[a.proposal_idx] = t.class_id
        gt_centers[a.proposal_idx] = t.center
        gt_rays[a.proposal_idx] = t.rays
    inside = sph.r + params.deltas <= sector_rays
    inter = np.sum(inside & fg, axis=1)
    union = np.sum(inside | fg, axis=1)
    iou = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    return StepConstants(
        radii=sph.r,
        sectors=sectors,
        sector_rays=sector_rays,
        fg=fg,
        matched=matched,
        target_class=target_class,
        gt_centers=gt_centers,
        gt_rays=gt_rays,
        iou_targets=iou,
    )


@dataclass
class TotalLoss:
    value: float
    coarse: float
    fine: float
    cls: float
    conf: float
    grads: FitParams


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def total_loss(
    params: FitParams, consts: StepConstants, cfg: FitConfig
) -> TotalLoss:
    """Sum of per-pair losses plus no-object classification, with grads.

    Smooth in ``params`` as long as no point sits exactly on a containment
    boundary and no coarse residual sits exactly at 0; ``consts`` carries
    everything else.
    """
    grads = params.zeros_like()
    matched = consts.matched
    m_col = matched[:, None]
    k, s = params.log_rays.shape

    # Coarse shape regression, matched rows only.
    rays = np.exp(params.log_rays)
    ray_diff = rays - consts.gt_rays
    center_diff = params.centers - consts.gt_centers
    coarse_rows = np.mean(np.abs(ray_diff), axis=1) + np.sum(
        np.abs(center_diff), axis=1
    )
    coarse_val = float(np.sum(coarse_rows * matched))
    grad_rays = np.sign(ray_diff) / s * m_col
    grads.log_rays += cfg.lambda_coarse * grad_rays * rays
    grads.centers += cfg.lambda_coarse * np.sign(center_diff) * m_col

    # Migration losses on the frozen partition geometry.
    fine_val = 0.0
    if cfg.variant != "rid_only":
        migrated = consts.radii + params.deltas
        inside = migrated <= consts.sector_rays
        fg = consts.fg
        tp = fg & inside & m_col
        fn = fg & ~inside & m_col
        fp = ~fg & inside & m_col
        miss = fn | fp
        n_miss = np.maximum(miss.sum(axis=1), 1)
        y = np.where(fn, 1.0, 0.0) - np.where(fp, 1.0, 0.0)
        t = np.tanh(migrated - consts.sector_rays)
        yt = y * t
        mc_rows = np.sum(np.where(miss, np.log1p(np.exp(yt)), 0.0), axis=1) / n_miss
        grad_mc = (
            np.where(miss, _sigmoid(yt) * y * (1.0 - t * t), 0.0) / n_miss[:, None]
        )
        fine_val += float(np.sum(mc_rows))
        grads.deltas += cfg.lambda_fine * grad_mc
        if cfg.variant == "full":
            n_tp = np.maximum(tp.sum(axis=1), 1)
            v = np.tanh(migrated)
            sc_rows = np.sum(np.where(tp, np.log1p(np.exp(v)), 0.0), axis=1) / n_tp
            grad_sc = (
                np.where(tp, _sigmoid(v) * (1.0 - v * v), 0.0) / n_tp[:, None]
            )
            fine_val += float(np.sum(sc_rows))
            grads.deltas += cfg.lambda_fine * grad_sc

    # Classification, every row (unmatched rows target the no-object slot).
    shifted = params.logits - params.logits.max(axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1))
    rows = np.arange(k)
    ce_rows = log_z - shifted[rows, consts.target_class]
    probs = np.exp(shifted - log_z[:, None])
    grad_logits = probs.copy()
    grad_logits[rows, consts.target_class] -= 1.0
    cls_val = float(np.sum(ce_rows))
    grads.logits += cfg.lambda_cls * grad_logits

    # Confidence regression toward the frozen overlap, matched rows only.
    conf = _sigmoid(params.conf_raw)
    conf_diff = conf - consts.iou_targets
    conf_val = float(np.sum(conf_diff * conf_diff * matched))
    grads.conf_raw += (
        cfg.lambda_conf * 2.0 * conf_diff * conf * (1.0 - conf) * matched
    )

    value = (
        cfg.lambda_coarse * coarse_val
        + cfg.lambda_fine * fine_val
        + cfg.lambda_cls * cls_val
        + cfg.lambda_conf * conf_val
    )
    return TotalLoss(value, coarse_val, fine_val, cls_val, conf_val, grads)


def farthest_point_sample(points: np.ndarray, k: int) -> np.ndarray:
    """Deterministic farthest point sampling, seeded at the most central point."""
    points = check_points(points)
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}")
    centroid = points.mean(axis=0)
    first = int(np.argmin(np.linalg.norm(points - centroid, axis=1)))
    chosen = [first]
    dist = np.linalg.norm(points - points[first], axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return np.array(chosen, dtype=np.int64)


def init_params(points: np.ndarray, k: int, cfg: FitConfig) -> FitParams:
    """Proposal bank start: spread centers, local-scale rays, neutral rest."""
    n = len(points)
    centers = points[farthest_point_sample(points, k)].copy()
    diff = points[None, :, :] - centers[:, None, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    m = min(cfg.init_neighbors, n)
    nearest = np.sort(dist, axis=1)[:, :m]
    scale = np.maximum(np.median(nearest, axis=1), 1e-3)
    log_rays = np.tile(np.log(scale)[:, None], (1, cfg.grid.n_sectors))
    return FitParams(
        centers=centers,
        log_rays=log_rays,
        deltas=np.zeros((k, n)),
        logits=np.zeros((k, cfg.n_classes + 1)),
        conf_raw=np.zeros(k),
    )


def targets_from_labels(
    points: np.ndarray,
    instance_ids: np.ndarray,
    semantic_ids: Optional[np.ndarray],
    grid: SectorGrid,
) -> list[MatchTarget]:
    """One match target per labeled instance."""
    points = check_points(points)
    instance_ids = check_labels(instance_ids, len(points), "instance_ids")
    targets = []
    for inst_id in np.unique(instance_ids):
        if inst_id < 0:
            continue
        fg = instance_ids == inst_id
        center = instance_center(points[fg])
        targets.append(
            MatchTarget(
                center=center,
                rays=ray_targets(points[fg], center, grid),
                fg_mask=fg,
                class_id=int(semantic_ids[np.flatnonzero(fg)[0]])
                if semantic_ids is not None
                else 0,
            )
        )
    return targets


@dataclass
class FitResult:
    """Fitted proposals plus the optimization trace."""

    proposals: list[Proposal]  # after confidence filtering and overlap NMS
    raw_proposals: list[Proposal]  # every non-no-object proposal, unfiltered
    params: FitParams
    assignment: list[Assignment]
    loss_history: list[float]
    component_history: list[tuple[float, float, float, float]]


def _proposal_states(params: FitParams):
    from .matching import ProposalState

    return [
        ProposalState(
            center=params.centers[i],
            rays=np.exp(params.log_rays[i]),
            deltas=params.deltas[i],
            logits=params.logits[i],
        )
        for i in range(len(params.conf_raw))
    ]


def fit_targets(
    points: np.ndarray, targets: list[MatchTarget], cfg: FitConfig
) -> FitResult:
    """Optimize a proposal bank against known targets."""
    points = check_points(points)
    if not targets:
        raise ValueError("need at least one target")
    for t in targets:
        if not 0 <= t.class_id < cfg.n_classes:
            raise ValueError(
                f"class id {t.class_id} outside the configured {cfg.n_classes}"
            )
    k = cfg.n_proposals
    if k is None:
        k = max(cfg.gt_duplication * len(targets), 4)
    params = init_params(points, k, cfg)
    assignment: list[Assignment] = []
    loss_history = []
    component_history = []
    for it in range(cfg.iterations):
        if it % cfg.rematch_interval == 0:
            assignment = assign_proposals(
                points, cfg.grid, _proposal_states(params), targets, cfg.gt_duplication
            )
        consts = step_constants(points, params, targets, assignment, cfg)
        loss = total_loss(params, consts, cfg)
        loss_history.append(loss.value)
        component_history.append((loss.coarse, loss.fine, loss.cls, loss.conf))
        lr = cfg.lr
        if cfg.anneal:
            lr = cfg.lr * 0.5 * (1.0 + math.cos(math.pi * it / cfg.iterations))
        params.centers -= lr * loss.grads.centers
        params.log_rays -= lr * loss.grads.log_rays
        params.deltas -= lr * loss.grads.deltas
        params.logits -= lr * loss.grads.logits
        params.conf_raw -= lr * loss.grads.conf_raw
        np.clip(params.log_rays, -12.0, 8.0, out=params.log_rays)
    consts = step_constants(points, params, targets, assignment, cfg)
    inside = consts.radii + params.deltas <= consts.sector_rays
    raw = []
    for i in range(k):
        class_id = int(np.argmax(params.logits[i]))
        if class_id == cfg.no_object_class:
            continue
        raw.append(
            Proposal(
                mask=inside[i],
                class_id=class_id,
                confidence=float(_sigmoid(params.conf_raw[i])),
                polygon=RadialPolygon(
                    params.centers[i], np.exp(params.log_rays[i]), cfg.grid
                ),
                deltas=params.deltas[i],
            )
        )
    kept = nms(raw, cfg.conf_threshold, cfg.nms_iou)
    return FitResult(
        proposals=kept,
        raw_proposals=raw,
        params=params,
        assignment=assignment,
        loss_history=loss_history,
        component_history=component_history,
    )


def fit_scene(
    points: np.ndarray,
    instance_ids: np.ndarray,
    semantic_ids: Optional[np.ndarray],
    cfg: FitConfig,
) -> FitResult:
    """Fit proposals to a scene's labeled instances."""
    targets = targets_from_labels(points, instance_ids, semantic_ids, cfg.grid)
    return fit_targets(points, targets, cfg)


def kink_margin(params: FitParams, consts: StepConstants, cfg: FitConfig) -> float:
    """Distance of the current state from the loss's nearest non-smooth point.

    The total loss is piecewise smooth; kinks sit where a migrated radius
    equals its sector ray (partition flip) and where a coarse residual
    crosses 0. Finite differencing is only trustworthy when this margin
    comfortably exceeds the probe step.
    """
    matched = consts.matched
    if not matched.any():
        return float("inf")
    margins = []
    rays = np.exp(params.log_rays)
    margins.append(np.min(np.abs(rays - consts.gt_rays)[matched]))
    margins.append(np.min(np.abs(params.centers - consts.gt_centers)[matched]))
    if cfg.variant != "rid_only":
        migrated = consts.radii + params.deltas
        margins.append(np.min(np.abs(migrated - consts.sector_rays)[matched]))
    return float(min(margins))


@dataclass
class GradCheckReport:
    """Analytic-versus-numeric gradient agreement for one configuration."""

    max_abs_err: float
    err_by_group: dict
    margin: float
    eps: float

    def ok(self, tol: float = 1e-4) -> bool:
        return self.max_abs_err <= tol


def check_gradients(
    points: np.ndarray,
    targets: list[MatchTarget],
    cfg: FitConfig,
    seed: int = 0,
    eps: float = 1e-6,
    margin: float = 1e-4,
    attempts: int = 50,
) -> GradCheckReport:
    """Compare analytic total-loss gradients against central differences.

    Parameters are jittered around their initialization until every point
    sits at least ``margin`` away from a partition flip and every coarse
    residual is at least ``margin`` from zero, then each packed coordinate
    is probed with a symmetric step of ``eps``. The assignment and the
    step constants are frozen throughout, exactly as in one optimizer
    step.
    """
    points = check_points(points)
    rng = np.random.default_rng(seed)
    k = cfg.n_proposals
    if k is None:
        k = max(cfg.gt_duplication * len(targets), 4)
    base = init_params(points, k, cfg)
    for _ in range(attempts):
        params = base.copy()
        params.centers += rng.uniform(-0.5, 0.5, size=params.centers.shape)
        params.log_rays += rng.uniform(-0.3, 0.3, size=params.log_rays.shape)
        params.deltas += rng.uniform(-0.2, 0.2, size=params.deltas.shape)
        params.logits += rng.normal(0.0, 0.5, size=params.logits.shape)
        params.conf_raw += rng.normal(0.0, 0.5, size=params.conf_raw.shape)
        assignment = assign_proposals(
            points, cfg.grid, _proposal_states(params), targets, cfg.gt_duplication
        )
        consts = step_constants(points, params, targets, assignment, cfg)
        got_margin = kink_margin(params, consts, cfg)
        if got_margin > margin:
            break
    else:
        raise RuntimeError(
            f"no kink-free configuration found in {attempts} attempts"
        )
    analytic = pack_params(total_loss(params, consts, cfg).grads)
    vec = pack_params(params)
    numeric = np.empty_like(vec)
    for i in range(len(vec)):
        bumped = vec.copy()
        bumped[i] = vec[i] + eps
        up = total_loss(unpack_params(bumped, params), consts, cfg).value
        bumped[i] = vec[i] - eps
        down = total_loss(unpack_params(bumped, params), consts, cfg).value
        numeric[i] = (up - down) / (2.0 * eps)
    err = np.abs(analytic - numeric)
    sizes = [
        ("centers", params.centers.size),
        ("log_rays", params.log_rays.size),
        ("deltas", params.deltas.size),
        ("logits", params.logits.size),
        ("conf_raw", params.conf_raw.size),
    ]
    err_by_group = {}
    pos = 0
    for name, size in sizes:
        err_by_group[name] = float(err[pos : pos + size].max())
        pos += size
    return GradCheckReport(
        max_abs_err=float(err.max()),
        err_by_group=err_by_group,
        margin=got_margin,
        eps=eps,
    )
