"""Spherical coordinate transforms and uniform angular sector binning.

Conventions used library-wide:

* ``theta`` is the azimuth in the xy-plane, measured with the full-quadrant
  two-argument arctangent, in ``(-pi, pi]``.
* ``phi`` is the elevation, ``arcsin(z / r)``, in ``[-pi/2, pi/2]``.
* The origin (``r == 0``) maps to ``theta = phi = 0``.
* Sector index layout is ``i_theta * n_phi + i_phi``; values exactly on the
  upper boundary (``theta == pi`` or ``phi == pi/2``) clamp into the last bin
  so the bins partition the whole sphere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .validation import ensure_finite

ORIGIN = np.zeros(3)


@dataclass(frozen=True)
class SectorGrid:
    """Uniform (theta, phi) angular partition with n_theta * n_phi sectors."""

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError(
                f"grid counts must be >= 1, got {self.n_theta}/{self.n_phi}"
            )

    @property
    def n_sectors(self) -> int:
        return self.n_theta * self.n_phi

    def theta_edges(self) -> np.ndarray:
        return -np.pi + np.arange(self.n_theta + 1) * (2.0 * np.pi / self.n_theta)

    def phi_edges(self) -> np.ndarray:
        return -np.pi / 2 + np.arange(self.n_phi + 1) * (np.pi / self.n_phi)


class Spherical(NamedTuple):
    """Spherical coordinates of one point or an array of points."""

    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray


def to_spherical(points, center=ORIGIN) -> Spherical:
    """Convert Cartesian points to spherical coordinates around ``center``.

    ``points`` may be a single (3,) point or an (..., 3) array; the returned
    component arrays have the matching leading shape. Radius is the Euclidean
    distance from ``center``; zero-radius points get theta = phi = 0.
    """
    points = np.asarray(points, dtype=float)
    center = np.asarray(center, dtype=float)
    ensure_finite("points", points)
    ensure_finite("center", center)
    d = points - center
    r = np.sqrt(np.sum(d * d, axis=-1))
    with np.errstate(invalid="ignore"):
        theta = np.arctan2(d[..., 1], d[..., 0])
        phi = np.arcsin(np.clip(np.where(r > 0, d[..., 2] / np.where(r > 0, r, 1.0), 0.0), -1.0, 1.0))
    # arctan2 can return -pi for y = -0.0; fold onto the (-pi, pi] convention
    theta = np.where(theta <= -np.pi, theta + 2.0 * np.pi, theta)
    at_center = r == 0
    theta = np.where(at_center, 0.0, theta)
    phi = np.where(at_center, 0.0, phi)
    return Spherical(r, theta, phi)


def from_spherical(r, theta, phi, center=ORIGIN) -> np.ndarray:
    """Inverse of :func:`to_spherical`; broadcasts over component arrays."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    center = np.asarray(center, dtype=float)
    cos_phi = np.cos(phi)
    xyz = np.stack(
        [r * cos_phi * np.cos(theta), r * cos_phi * np.sin(theta), r * np.sin(phi)],
        axis=-1,
    )
    return xyz + center


def find_sector(theta, phi, grid: SectorGrid) -> np.ndarray:
    """Map angles to flat sector indices in ``[0, n_theta * n_phi)``.

    Bins are uniform over theta in (-pi, pi] and phi in [-pi/2, pi/2];
    index = i_theta * n_phi + i_phi.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    i_theta = np.floor((theta + np.pi) * (grid.n_theta / (2.0 * np.pi))).astype(np.int64)
    i_phi = np.floor((phi + np.pi / 2) * (grid.n_phi / np.pi)).astype(np.int64)
    i_theta = np.clip(i_theta, 0, grid.n_theta - 1)
    i_phi = np.clip(i_phi, 0, grid.n_phi - 1)
    return i_theta * grid.n_phi + i_phi


def sectors_of_points(points, center, grid: SectorGrid) -> np.ndarray:
    """Sector index of each point relative to ``center``."""
    sph = to_spherical(points, center)
    return find_sector(sph.theta, sph.phi, grid)
