"""Radial polygon 3d point cloud instance segmentation.

Instances are represented as a center plus per-sector ray lengths on a
uniform angular grid, refined by per-point radial migration offsets; the
package covers the geometry, the losses, proposal-to-target matching,
mask assembly with suppression, evaluation metrics, a synthetic scene
generator, a direct gradient-descent fitter, and a CLI.
"""

from .assembly import (
    Proposal,
    assemble_mask,
    mask_iou,
    masks_to_labels,
    nms,
    rle_decode,
    rle_encode,
)
from .detection import (
    Aabb,
    RadialPolygon,
    aabb_of_points,
    fit_polygon,
    instance_center,
    ray_targets,
    tightness_report,
)
from .estimator import RadialInstanceSegmenter
from .fitter import (
    FitConfig,
    FitParams,
    FitResult,
    check_gradients,
    farthest_point_sample,
    fit_scene,
    fit_targets,
    targets_from_labels,
    total_loss,
)
from .geometry import (
    SectorGrid,
    Spherical,
    find_sector,
    from_spherical,
    sectors_of_points,
    to_spherical,
)
from .matching import (
    Assignment,
    MatchTarget,
    ProposalState,
    assign_proposals,
    build_cost_matrix,
    duplicate_targets,
    hungarian_solve,
)
from .metrics import EvalResult, average_precision, evaluate
from .migration import (
    PointPartition,
    classification_loss,
    classify_points,
    coarse_loss,
    cohesion_loss,
    confidence_loss,
    fine_loss,
    migrated_positions,
    misclassification_loss,
    partition_for_polygon,
)
from .scene import (
    GroundTruthInstance,
    PointCloud,
    SceneParseError,
    instances_from_labels,
    read_scene,
    write_scene,
)
from .synth import SceneSpec, generate_scene

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "Assignment",
    "EvalResult",
    "FitConfig",
    "FitParams",
    "FitResult",
    "GroundTruthInstance",
    "MatchTarget",
    "PointCloud",
    "PointPartition",
    "Proposal",
    "ProposalState",
    "RadialInstanceSegmenter",
    "RadialPolygon",
    "SceneParseError",
    "SceneSpec",
    "SectorGrid",
    "Spherical",
    "aabb_of_points",
    "assemble_mask",
    "assign_proposals",
    "average_precision",
    "build_cost_matrix",
    "check_gradients",
    "classification_loss",
    "classify_points",
    "coarse_loss",
    "cohesion_loss",
    "confidence_loss",
    "duplicate_targets",
    "evaluate",
    "farthest_point_sample",
    "find_sector",
    "fine_loss",
    "fit_polygon",
    "fit_scene",
    "fit_targets",
    "from_spherical",
    "generate_scene",
    "hungarian_solve",
    "instance_center",
    "instances_from_labels",
    "mask_iou",
    "masks_to_labels",
    "migrated_positions",
    "misclassification_loss",
    "nms",
    "partition_for_polygon",
    "ray_targets",
    "read_scene",
    "rle_decode",
    "rle_encode",
    "sectors_of_points",
    "targets_from_labels",
    "tightness_report",
    "to_spherical",
    "total_loss",
    "write_scene",
]
