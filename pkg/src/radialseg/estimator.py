"""Scikit-learn style front door for the whole pipeline."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .assembly import masks_to_labels
from .fitter import FitConfig, fit_scene
from .geometry import SectorGrid
from .metrics import evaluate
from .scene import PointCloud, instances_from_labels
from .validation import check_labels, check_points


class RadialInstanceSegmenter(BaseEstimator):
    """Fits radial polygon proposals to a labeled point cloud.

    ``fit`` optimizes a proposal bank against the instance labels of one
    scene; ``predict`` then tags points with the id of the proposal that
    claims them (-1 for unclaimed). On the exact point array seen during
    ``fit`` the learned per-point migration deltas participate; on any
    other array containment is purely geometric.
    """

    def __init__(
        self,
        n_theta: int = 5,
        n_phi: int = 5,
        n_proposals: Optional[int] = None,
        iterations: int = 400,
        lr: float = 0.3,
        anneal: bool = True,
        rematch_interval: int = 25,
        n_classes: Optional[int] = None,
        conf_threshold: float = 0.2,
        nms_iou: float = 0.5,
        variant: str = "full",
    ):
        self.n_theta = n_theta
        self.n_phi = n_phi
        self.n_proposals = n_proposals
        self.iterations = iterations
        self.lr = lr
        self.anneal = anneal
        self.rematch_interval = rematch_interval
        self.n_classes = n_classes
        self.conf_threshold = conf_threshold
        self.nms_iou = nms_iou
        self.variant = variant

    def _config(self, semantic: Optional[np.ndarray]) -> FitConfig:
        n_classes = self.n_classes
        if n_classes is None:
            n_classes = int(semantic.max()) + 1 if semantic is not None else 1
        return FitConfig(
            grid=SectorGrid(self.n_theta, self.n_phi),
            n_proposals=self.n_proposals,
            iterations=self.iterations,
            lr=self.lr,
            anneal=self.anneal,
            rematch_interval=self.rematch_interval,
            n_classes=max(n_classes, 1),
            conf_threshold=self.conf_threshold,
            nms_iou=self.nms_iou,
            variant=self.variant,
        )

    def fit(self, X, y, semantic=None):
        X = check_points(X)
        y = check_labels(y, len(X), "y")
        if semantic is not None:
            semantic = check_labels(semantic, len(X), "semantic")
        self.result_ = fit_scene(X, y, semantic, self._config(semantic))
        self.points_ = X
        self.n_features_in_ = 3
        return self

    @property
    def proposals_(self):
        check_is_fitted(self, "result_")
        return self.result_.proposals

    def _masks_for(self, X: np.ndarray) -> list[np.ndarray]:
        if X.shape == self.points_.shape and np.array_equal(X, self.points_):
            return [p.mask for p in self.proposals_]
        return [p.polygon.contains(X) for p in self.proposals_]

    def predict(self, X) -> np.ndarray:
        """Per-point proposal index in confidence order, -1 for background."""
        check_is_fitted(self, "result_")
        X = check_points(X)
        return masks_to_labels(self._masks_for(X), len(X))

    def fit_predict(self, X, y, semantic=None) -> np.ndarray:
        return self.fit(X, y, semantic).predict(X)

    def score(self, X, y, semantic=None) -> float:
        """Average precision at overlap 0.5 against the given labels."""
        check_is_fitted(self, "result_")
        X = check_points(X)
        y = check_labels(y, len(X), "y")
        if semantic is not None:
            semantic = check_labels(semantic, len(X), "semantic")
        cloud = PointCloud(X, None, y, semantic)
        masks = self._masks_for(X)
        from .assembly import Proposal

        proposals = [
            Proposal(mask, p.class_id, p.confidence)
            for mask, p in zip(masks, self.proposals_)
        ]
        result = evaluate(proposals, instances_from_labels(cloud), len(X))
        return result.ap50
