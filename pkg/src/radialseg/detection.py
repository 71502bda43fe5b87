"""Radial polygon instance shapes and the box baseline they replace.

An instance is summarized by a center plus one ray length per angular
sector. A point belongs to the shape when its distance from the center is
at most the ray of the sector it falls in. Per-sector ray targets are the
max radius of the instance's own points, so the target shape always covers
the instance while hugging it far tighter than an axis-aligned box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SectorGrid, sectors_of_points, to_spherical
from .validation import check_points

# Ray length assigned to sectors that contain no instance points. Keeps
# every ray strictly positive while making empty sectors reject everything
# farther than a hair from the center.
EMPTY_SECTOR_RAY = 1e-5


@dataclass
class RadialPolygon:
    """Center plus per-sector ray lengths on a fixed angular grid."""

    center: np.ndarray  # (3,)
    rays: np.ndarray  # (grid.n_sectors,) all > 0
    grid: SectorGrid

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        self.rays = np.asarray(self.rays, dtype=float).reshape(-1)
        if self.rays.shape != (self.grid.n_sectors,):
            raise ValueError(
                f"rays must have length {self.grid.n_sectors}, got {self.rays.shape}"
            )
        if not np.all(self.rays > 0):
            raise ValueError("all rays must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask: radius <= sector ray (boundary points count as inside)."""
        points = check_points(points)
        r = to_spherical(points, self.center).r
        sec = sectors_of_points(points, self.center, self.grid)
        return r <= self.rays[sec]

    def volume_proxy(self) -> float:
        """Sum of cubed rays; monotone stand-in for enclosed volume."""
        return float(np.sum(self.rays**3))


def instance_center(points: np.ndarray) -> np.ndarray:
    """Target center: the mean of the instance's points."""
    points = check_points(points)
    if len(points) == 0:
        raise ValueError("cannot take the center of zero points")
    return points.mean(axis=0)


def ray_targets(
    points: np.ndarray, center: np.ndarray, grid: SectorGrid
) -> np.ndarray:
    """Per-sector max radius of ``points`` around ``center``.

    Sectors with no points get ``EMPTY_SECTOR_RAY``.
    """
    points = check_points(points)
    rays = np.full(grid.n_sectors, EMPTY_SECTOR_RAY)
    if len(points) == 0:
        return rays
    r = to_spherical(points, center).r
    sec = sectors_of_points(points, center, grid)
    np.maximum.at(rays, sec, r)
    return rays


def fit_polygon(points: np.ndarray, grid: SectorGrid) -> RadialPolygon:
    """Ground-truth polygon for an instance: mean center, max-radius rays."""
    center = instance_center(points)
    return RadialPolygon(center, ray_targets(points, center, grid), grid)


@dataclass
class Aabb:
    """Axis-aligned bounding box, the baseline shape for tightness checks."""

    lo: np.ndarray  # (3,)
    hi: np.ndarray  # (3,)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).reshape(3)
        self.hi = np.asarray(self.hi, dtype=float).reshape(3)
        if np.any(self.lo > self.hi):
            raise ValueError("lo must not exceed hi")

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = check_points(points)
        return np.all((points >= self.lo) & (points <= self.hi), axis=1)

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))


def aabb_of_points(points: np.ndarray) -> Aabb:
    points = check_points(points)
    if len(points) == 0:
        raise ValueError("cannot bound zero points")
    return Aabb(points.min(axis=0), points.max(axis=0))


@dataclass
class TightnessRow:
    """Per-instance captured-point counts for both shapes."""

    instance_id: int
    n_instance_points: int
    polygon_covered: int  # instance points inside the polygon
    box_covered: int  # instance points inside the box
    polygon_extra: int  # non-instance points inside the polygon
    box_extra: int  # non-instance points inside the box


@dataclass
class TightnessReport:
    """How much foreign geometry each shape style swallows, scene-wide."""

    rows: list[TightnessRow]

    @property
    def polygon_extra_total(self) -> int:
        return sum(r.polygon_extra for r in self.rows)

    @property
    def box_extra_total(self) -> int:
        return sum(r.box_extra for r in self.rows)

    @property
    def polygon_coverage(self) -> float:
        """Fraction of instance points the polygons recover."""
        n = sum(r.n_instance_points for r in self.rows)
        got = sum(r.polygon_covered for r in self.rows)
        return got / n if n else 1.0

    @property
    def box_coverage(self) -> float:
        n = sum(r.n_instance_points for r in self.rows)
        got = sum(r.box_covered for r in self.rows)
        return got / n if n else 1.0

    def extra_ratio(self) -> float:
        """Polygon extra points relative to box extra points (lower = tighter)."""
        if self.box_extra_total == 0:
            return 0.0 if self.polygon_extra_total == 0 else float("inf")
        return self.polygon_extra_total / self.box_extra_total


def tightness_report(
    positions: np.ndarray, instance_ids: np.ndarray, grid: SectorGrid
) -> TightnessReport:
    """Fit both shapes to every labeled instance and count captures."""
    positions = check_points(positions)
    instance_ids = np.asarray(instance_ids, dtype=np.int64).reshape(-1)
    rows = []
    for inst_id in np.unique(instance_ids):
        if inst_id < 0:
            continue
        member = instance_ids == inst_id
        pts = positions[member]
        poly = fit_polygon(pts, grid)
        box = aabb_of_points(pts)
        in_poly = poly.contains(positions)
        in_box = box.contains(positions)
        rows.append(
            TightnessRow(
                instance_id=int(inst_id),
                n_instance_points=int(member.sum()),
                polygon_covered=int(np.sum(in_poly & member)),
                box_covered=int(np.sum(in_box & member)),
                polygon_extra=int(np.sum(in_poly & ~member)),
                box_extra=int(np.sum(in_box & ~member)),
            )
        )
    return TightnessReport(rows)
