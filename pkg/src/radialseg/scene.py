"""Scene containers and the columnar scene text format.

File format (version 1)::

    # scene v1 points=<N> colors=<0|1>
    x y z [r g b] instance_id semantic_id

One point per line, whitespace separated. ``instance_id`` is -1 for
background points, otherwise a non-negative id shared by all points of one
instance; ``semantic_id`` is the instance's class (-1 for background).
Floats are written with shortest round-trip precision, so writing is
byte-deterministic for identical input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .validation import check_labels, check_points


class SceneParseError(ValueError):
    """Malformed scene file; carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class PointCloud:
    """Point positions with optional color and ground-truth labels."""

    positions: np.ndarray  # (N, 3) meters
    colors: Optional[np.ndarray] = None  # (N, 3) in [0, 1]
    instance_ids: Optional[np.ndarray] = None  # (N,), -1 = background
    semantic_ids: Optional[np.ndarray] = None  # (N,), -1 = background

    def __post_init__(self):
        self.positions = check_points(self.positions)
        n = len(self.positions)
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=float)
            if self.colors.shape != (n, 3):
                raise ValueError(f"colors must have shape ({n}, 3)")
        if self.instance_ids is not None:
            self.instance_ids = check_labels(self.instance_ids, n, "instance_ids")
        if self.semantic_ids is not None:
            self.semantic_ids = check_labels(self.semantic_ids, n, "semantic_ids")

    @property
    def n_points(self) -> int:
        return len(self.positions)


@dataclass
class GroundTruthInstance:
    """One labeled instance: its point indices and class."""

    point_indices: np.ndarray
    class_id: int
    instance_id: int

    def __post_init__(self):
        self.point_indices = np.asarray(self.point_indices, dtype=np.int64)
        if self.point_indices.size == 0:
            raise ValueError("instance must contain at least one point")

    def mask(self, n_points: int) -> np.ndarray:
        m = np.zeros(n_points, dtype=bool)
        m[self.point_indices] = True
        return m


def instances_from_labels(cloud: PointCloud) -> list[GroundTruthInstance]:
    """Extract per-instance index sets from the cloud's label columns."""
    if cloud.instance_ids is None:
        return []
    sem = cloud.semantic_ids
    out = []
    for inst_id in np.unique(cloud.instance_ids):
        if inst_id < 0:
            continue
        idx = np.flatnonzero(cloud.instance_ids == inst_id)
        class_id = int(sem[idx[0]]) if sem is not None else 0
        out.append(GroundTruthInstance(idx, class_id, int(inst_id)))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def write_scene(path, cloud: PointCloud) -> None:
    has_color = cloud.colors is not None
    inst = cloud.instance_ids
    sem = cloud.semantic_ids
    if inst is None:
        inst = np.full(cloud.n_points, -1, dtype=np.int64)
    if sem is None:
        sem = np.full(cloud.n_points, -1, dtype=np.int64)
    lines = [f"# scene v1 points={cloud.n_points} colors={int(has_color)}"]
    for i in range(cloud.n_points):
        cols = [_fmt(v) for v in cloud.positions[i]]
        if has_color:
            cols += [_fmt(v) for v in cloud.colors[i]]
        cols += [str(int(inst[i])), str(int(sem[i]))]
        lines.append(" ".join(cols))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_scene(path) -> PointCloud:
    with open(path) as f:
        raw = f.read().splitlines()
    if not raw:
        raise SceneParseError(1, "empty file")
    header = raw[0].split()
    if header[:3] != ["#", "scene", "v1"]:
        raise SceneParseError(1, f"expected '# scene v1' header, got {raw[0]!r}")
    fields = dict(tok.split("=", 1) for tok in header[3:] if "=" in tok)
    try:
        n_points = int(fields["points"])
        has_color = bool(int(fields["colors"]))
    except (KeyError, ValueError):
        raise SceneParseError(1, "header must carry points=<N> colors=<0|1>") from None
    n_cols = 8 if has_color else 5
    positions = np.empty((n_points, 3))
    colors = np.empty((n_points, 3)) if has_color else None
    inst = np.empty(n_points, dtype=np.int64)
    sem = np.empty(n_points, dtype=np.int64)
    data_lines = [(no, ln) for no, ln in enumerate(raw[1:], start=2) if ln.strip()]
    if len(data_lines) != n_points:
        raise SceneParseError(
            len(raw), f"header promises {n_points} points, file has {len(data_lines)}"
        )
    for row, (line_no, line) in enumerate(data_lines):
        toks = line.split()
        if len(toks) != n_cols:
            raise SceneParseError(line_no, f"expected {n_cols} columns, got {len(toks)}")
        try:
            vals = [float(t) for t in toks[: n_cols - 2]]
            inst[row] = int(toks[-2])
            sem[row] = int(toks[-1])
        except ValueError as e:
            raise SceneParseError(line_no, str(e)) from None
        positions[row] = vals[:3]
        if has_color:
            colors[row] = vals[3:6]
    return PointCloud(positions, colors, inst, sem)
