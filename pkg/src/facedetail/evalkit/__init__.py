from .alignment import RigidTransform, icp_point_to_plane, procrustes, rigid_align
from .distance import (
    TriangleIndex,
    brute_force_distances,
    closest_point_on_triangles,
    closest_points,
    scan_to_mesh_distance,
)
from .landmark_filter import FilterDecision, landmark_consistency_filter
from .stats import DEFAULT_THRESHOLDS, DistanceReport, cumulative_curve, error_stats, evaluate_reconstruction

__all__ = [
    "DEFAULT_THRESHOLDS",
    "DistanceReport",
    "FilterDecision",
    "RigidTransform",
    "TriangleIndex",
    "brute_force_distances",
    "closest_point_on_triangles",
    "closest_points",
    "cumulative_curve",
    "error_stats",
    "evaluate_reconstruction",
    "icp_point_to_plane",
    "landmark_consistency_filter",
    "procrustes",
    "rigid_align",
    "scan_to_mesh_distance",
]
