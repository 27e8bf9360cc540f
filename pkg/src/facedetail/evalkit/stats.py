"""
Error statistics and the full scan-to-mesh evaluation protocol.

Standard deviation is the population (1/N) value. The median of an even count is
the average of the two middle values.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..common.errors import ConfigurationError
from .alignment import RigidTransform, rigid_align
from .distance import scan_to_mesh_distance

logger = logging.getLogger(__name__)

# 0 to 10 mm in 0.01 mm steps
DEFAULT_THRESHOLDS = np.linspace(0.0, 10.0, 1001)


def error_stats(distances) -> tuple[float, float, float]:
    """Median, mean and population standard deviation"""
    values = np.asarray(distances, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ConfigurationError("no distances to summarize")
    return float(np.median(values)), float(values.mean()), float(values.std(ddof=0))


def cumulative_curve(distances, thresholds=None) -> np.ndarray:
    """Fraction of distances <= each threshold"""
    values = np.sort(np.asarray(distances, dtype=np.float64).reshape(-1))
    if values.size == 0:
        raise ConfigurationError("no distances to summarize")
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    return np.searchsorted(values, thresholds, side="right") / values.size


@dataclass(frozen=True, eq=False)
class DistanceReport:
    distances: np.ndarray
    median: float
    mean: float
    std: float
    thresholds: np.ndarray = field(repr=False)
    curve: np.ndarray = field(repr=False)
    transform: RigidTransform | None = field(default=None, repr=False)

    @classmethod
    def from_distances(cls, distances, thresholds=None, transform: RigidTransform | None = None) -> "DistanceReport":
        distances = np.asarray(distances, dtype=np.float64).reshape(-1)
        thresholds = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, dtype=np.float64)
        median, mean, std = error_stats(distances)
        return cls(distances, median, mean, std, thresholds, cumulative_curve(distances, thresholds), transform)

    def stats(self) -> dict[str, float]:
        return {"median": self.median, "mean": self.mean, "std": self.std, "count": int(self.distances.size)}

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        """stats.json, distances.csv and curve.csv"""
        from ..assets.formats import write_csv, write_json

        out_dir = Path(out_dir)
        return {
            "stats": write_json(out_dir / "stats.json", self.stats()),
            "distances": write_csv(out_dir / "distances.csv", ["index", "distance_mm"], enumerate(self.distances.tolist())),
            "curve": write_csv(
                out_dir / "curve.csv",
                ["threshold_mm", "fraction"],
                zip(self.thresholds.tolist(), self.curve.tolist()),
            ),
        }


def evaluate_reconstruction(
    scan_vertices,
    vertices,
    triangles,
    scan_landmarks=None,
    mesh_landmarks=None,
    *,
    icp: bool = False,
    with_scale: bool = False,
    unit_scale: float = 1.0,
    thresholds=None,
) -> DistanceReport:
    """
    Align the reconstruction to the scan (when landmarks are given), measure every
    scan vertex against the aligned surface and summarize in mm.

    `unit_scale` converts model units to millimetres (1000 for metres).
    """
    if unit_scale <= 0:
        raise ConfigurationError("unit scale must be positive")
    scan_vertices = np.asarray(scan_vertices, dtype=np.float64)
    vertices = np.asarray(vertices, dtype=np.float64)
    transform = None
    if scan_landmarks is not None and mesh_landmarks is not None:
        transform = rigid_align(
            scan_landmarks, mesh_landmarks, icp, scan_vertices, vertices, triangles, with_scale=with_scale
        )
        vertices = transform.apply(vertices)
    distances = scan_to_mesh_distance(scan_vertices, vertices, triangles) * unit_scale
    report = DistanceReport.from_distances(distances, thresholds, transform)
    logger.info("median %.4f mm, mean %.4f mm, std %.4f mm", report.median, report.mean, report.std)
    return report
