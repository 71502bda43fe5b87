"""Input validation helpers shared by the library and the estimator API."""

from __future__ import annotations

import numpy as np


def ensure_finite(name: str, arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_points(points) -> np.ndarray:
    """Validate and return an (N, 3) float64 array of finite positions."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"points must have shape (N, 3), got {points.shape}")
    ensure_finite("points", points)
    return points


def check_labels(labels, n_points: int, name: str = "labels") -> np.ndarray:
    """Validate per-point integer labels; -1 marks background."""
    labels = np.asarray(labels)
    if labels.shape != (n_points,):
        raise ValueError(f"{name} must have shape ({n_points},), got {labels.shape}")
    if labels.dtype.kind not in "iu":
        if not np.all(labels == labels.astype(np.int64)):
            raise ValueError(f"{name} must be integer-valued")
    labels = labels.astype(np.int64)
    if np.any(labels < -1):
        raise ValueError(f"{name} must be >= -1")
    return labels


def check_mask(mask, n_points: int, name: str = "mask") -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (n_points,):
        raise ValueError(f"{name} must have shape ({n_points},), got {mask.shape}")
    return mask.astype(bool)


def check_same_length(**arrays) -> None:
    """Raise if the named arrays do not all share one length."""
    lengths = {name: len(a) for name, a in arrays.items()}
    if len(set(lengths.values())) > 1:
        raise ValueError(f"length mismatch: {lengths}")
