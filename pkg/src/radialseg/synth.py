"""Synthetic labeled scenes for tests, benchmarks, and demos.

Three shape families, one class id each:

* 0, hollow shells: points on a noisy ellipsoid surface, like the single
  visible surface a depth sensor sees.
* 1, solid blobs: star-shaped volumes whose boundary radius is a random
  low-order angular mixture, always positive.
* 2, L shapes: two fused axis-aligned slabs. Their notch is not reachable
  by any single radius function around the centroid, so they probe how
  the pipeline behaves when the shape family's core assumption breaks.

Background clutter is uniform over the scene box. Everything is drawn
from one seeded generator, so a spec plus a seed pins the scene exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import PointCloud

FAMILY_NAMES = ("shell", "blob", "lshape")


@dataclass
class SceneSpec:
    """Knobs for one synthetic scene."""

    n_instances: int = 5
    points_per_instance: int = 150
    n_background: int = 500
    extent: float = 8.0  # scene box is [-extent, extent]^3
    min_scale: float = 1.0
    max_scale: float = 2.0
    min_separation: float = 5.0  # between instance centers
    surface_noise: float = 0.02  # radial jitter, relative to scale
    families: tuple = (0, 1, 2)  # family ids cycled over instances
    with_colors: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_instances < 1:
            raise ValueError("need at least one instance")
        if not all(0 <= f < len(FAMILY_NAMES) for f in self.families):
            raise ValueError(f"family ids must be in [0, {len(FAMILY_NAMES)})")
        if self.min_scale <= 0 or self.max_scale < self.min_scale:
            raise ValueError("need 0 < min_scale <= max_scale")


def _unit_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def _sample_shell(rng: np.random.Generator, n: int, scale: float, noise: float):
    dirs = _unit_directions(rng, n)
    semiaxes = scale * rng.uniform(0.6, 1.0, size=3)
    jitter = 1.0 + noise * rng.normal(size=n)
    return dirs * semiaxes * jitter[:, None]


def _sample_blob(rng: np.random.Generator, n: int, scale: float, noise: float):
    # Boundary radius is a mixture of low-order angular waves, clipped to
    # a positive floor so the shape never pinches through its center.
    amps = rng.uniform(0.1, 0.35, size=3)
    freq_t = rng.integers(1, 4, size=3)
    freq_p = rng.integers(1, 3, size=3)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(3, 2))
    dirs = _unit_directions(rng, n)
    theta = np.arctan2(dirs[:, 1], dirs[:, 0])
    phi = np.arcsin(np.clip(dirs[:, 2], -1.0, 1.0))
    radius = np.ones(n)
    for a, ft, fp, (p1, p2) in zip(amps, freq_t, freq_p, phases):
        radius = radius + a * np.cos(ft * theta + p1) * np.cos(fp * phi + p2)
    radius = np.maximum(radius, 0.3) * scale
    jitter = 1.0 + noise * rng.normal(size=n)
    u = rng.uniform(0.0, 1.0, size=n) ** (1.0 / 3.0)  # uniform over volume
    return dirs * (radius * u * jitter)[:, None]


def _sample_lshape(rng: np.random.Generator, n: int, scale: float, noise: float):
    # Two overlapping slabs forming an L in the xy plane. Rejection sample
    # from the bounding box; acceptance is ~58% so the loop stays short.
    out = np.empty((n, 3))
    have = 0
    while have < n:
        cand = rng.uniform(-0.5, 0.5, size=(4 * (n - have), 3))
        cand[:, 2] *= 0.4  # slab thickness
        in_a = (cand[:, 1] >= -0.5) & (cand[:, 1] <= -0.15)
        in_b = (cand[:, 0] >= -0.5) & (cand[:, 0] <= -0.15)
        keep = cand[in_a | in_b]
        take = min(len(keep), n - have)
        out[have : have + take] = keep[:take]
        have += take
    out *= 2.0 * scale
    out += noise * scale * rng.normal(size=(n, 3))
    return out


_SAMPLERS = (_sample_shell, _sample_blob, _sample_lshape)


def _place_centers(rng: np.random.Generator, spec: SceneSpec) -> np.ndarray:
    lo = -spec.extent + spec.max_scale
    hi = spec.extent - spec.max_scale
    if lo >= hi:
        raise ValueError("extent too small for the instance scale")
    centers = []
    attempts = 0
    while len(centers) < spec.n_instances:
        cand = rng.uniform(lo, hi, size=3)
        attempts += 1
        if all(np.linalg.norm(cand - c) >= spec.min_separation for c in centers):
            centers.append(cand)
        elif attempts > 1000 * spec.n_instances:
            raise ValueError(
                "could not place instances; lower min_separation or raise extent"
            )
    return np.array(centers)


# Fixed per-family colors, used when a spec asks for colored output.
_FAMILY_COLORS = np.array([[0.9, 0.3, 0.2], [0.2, 0.7, 0.3], [0.25, 0.4, 0.9]])
_BACKGROUND_COLOR = np.array([0.6, 0.6, 0.6])


def generate_scene(spec: SceneSpec) -> PointCloud:
    """Build the labeled point cloud a spec describes."""
    rng = np.random.default_rng(spec.seed)
    centers = _place_centers(rng, spec)
    chunks = []
    inst_ids = []
    sem_ids = []
    for i in range(spec.n_instances):
        family = spec.families[i % len(spec.families)]
        scale = rng.uniform(spec.min_scale, spec.max_scale)
        pts = _SAMPLERS[family](rng, spec.points_per_instance, scale, spec.surface_noise)
        chunks.append(pts + centers[i])
        inst_ids.append(np.full(spec.points_per_instance, i, dtype=np.int64))
        sem_ids.append(np.full(spec.points_per_instance, family, dtype=np.int64))
    if spec.n_background > 0:
        chunks.append(rng.uniform(-spec.extent, spec.extent, size=(spec.n_background, 3)))
        inst_ids.append(np.full(spec.n_background, -1, dtype=np.int64))
        sem_ids.append(np.full(spec.n_background, -1, dtype=np.int64))
    positions = np.concatenate(chunks)
    instance_ids = np.concatenate(inst_ids)
    semantic_ids = np.concatenate(sem_ids)
    order = rng.permutation(len(positions))
    positions = positions[order]
    instance_ids = instance_ids[order]
    semantic_ids = semantic_ids[order]
    colors = None
    if spec.with_colors:
        colors = np.where(
            (semantic_ids >= 0)[:, None],
            _FAMILY_COLORS[np.clip(semantic_ids, 0, None)],
            _BACKGROUND_COLOR,
        )
    return PointCloud(positions, colors, instance_ids, semantic_ids)
