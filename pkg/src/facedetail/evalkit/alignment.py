"""
Rigid alignment of a reconstruction onto a reference scan.

- rigid_align solves the orthogonal Procrustes problem on landmark pairs (SVD of the
  cross-covariance with a reflection guard), optionally with an isotropic scale.
- With `then_icp` the landmark solution is refined by point-to-plane ICP of the scan
  vertices against the transformed mesh surface.

Transforms map mesh coordinates into scan coordinates: x_scan = s * R x_mesh + t.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..common.errors import DegenerateConfigurationError, DimensionError
from .distance import TriangleIndex

logger = logging.getLogger(__name__)

ICP_ITERATIONS = 50
ICP_TOLERANCE = 1e-6
# singular-value ratio below which centred landmarks count as collinear
COLLINEAR_RATIO = 1e-9


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray  # (3, 3), det +1
    translation: np.ndarray  # (3,)
    scale: float = 1.0

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return self.scale * np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, first: "RigidTransform") -> "RigidTransform":
        """self after first"""
        return RigidTransform(
            self.rotation @ first.rotation,
            self.scale * self.rotation @ first.translation + self.translation,
            self.scale * first.scale,
        )

    def inverse(self) -> "RigidTransform":
        rotation = self.rotation.T
        return RigidTransform(rotation, -(rotation @ self.translation) / self.scale, 1.0 / self.scale)

    def is_orthonormal(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return bool(np.abs(r.T @ r - np.eye(3)).max() <= tol and np.linalg.det(r) > 0)


def _check_landmarks(source: np.ndarray, target: np.ndarray) -> None:
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise DimensionError(f"landmark sets must both be p x 3, got {source.shape} and {target.shape}")
    if source.shape[0] < 3:
        raise DegenerateConfigurationError("at least three landmark pairs are needed")
    for points in (source, target):
        singular = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
        if singular[0] == 0 or singular[1] <= COLLINEAR_RATIO * singular[0]:
            raise DegenerateConfigurationError("landmarks are collinear")


def procrustes(source: np.ndarray, target: np.ndarray, with_scale: bool = False) -> RigidTransform:
    """Least-squares transform taking source points onto target points"""
    mu_s, mu_t = source.mean(axis=0), target.mean(axis=0)
    src, dst = source - mu_s, target - mu_t
    u, sigma, vt = np.linalg.svd(dst.T @ src)
    d = np.sign(np.linalg.det(u @ vt)) or 1.0
    correction = np.diag([1.0, 1.0, d])
    rotation = u @ correction @ vt
    scale = float((sigma * np.diag(correction)).sum() / (src**2).sum()) if with_scale else 1.0
    return RigidTransform(rotation, mu_t - scale * rotation @ mu_s, scale)


def icp_point_to_plane(
    scan: np.ndarray,
    vertices: np.ndarray,
    triangles: np.ndarray,
    init: RigidTransform,
    iterations: int = ICP_ITERATIONS,
    tolerance: float = ICP_TOLERANCE,
) -> RigidTransform:
    """
    Refine a mesh-to-scan transform by moving the scan onto the (fixed) mesh surface.

    Each iteration linearizes the rotation and solves for the update minimizing
    the squared point-to-plane residuals against the closest-triangle planes.
    """
    index = TriangleIndex(vertices, triangles)
    corners = index.corners
    normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, lengths, out=np.zeros_like(normals), where=lengths > 0)

    scan_to_mesh = init.inverse()
    for iteration in range(iterations):
        moved = scan_to_mesh.apply(scan)
        _, tri, closest = index.query(moved)
        n = normals[tri]
        residual = np.einsum("ij,ij->i", closest - moved, n)
        system = np.concatenate([np.cross(moved, n), n], axis=1)
        update, *_ = np.linalg.lstsq(system, residual, rcond=None)
        step = RigidTransform(Rotation.from_rotvec(update[:3]).as_matrix(), update[3:])
        scan_to_mesh = step.compose(scan_to_mesh)
        if np.linalg.norm(update) < tolerance:
            logger.debug("icp converged after %d iterations", iteration + 1)
            break
    else:
        logger.debug("icp stopped after %d iterations", iterations)
    return scan_to_mesh.inverse()


def rigid_align(
    scan_landmarks,
    mesh_landmarks,
    then_icp: bool = False,
    scan=None,
    vertices=None,
    triangles=None,
    *,
    with_scale: bool = False,
    iterations: int = ICP_ITERATIONS,
    tolerance: float = ICP_TOLERANCE,
) -> RigidTransform:
    """Transform mapping the mesh onto the scan from landmark pairs, optionally ICP-refined"""
    target = np.asarray(scan_landmarks, dtype=np.float64)
    source = np.asarray(mesh_landmarks, dtype=np.float64)
    _check_landmarks(source, target)
    transform = procrustes(source, target, with_scale=with_scale)
    if then_icp:
        if scan is None or vertices is None or triangles is None:
            raise DimensionError("ICP refinement needs the scan vertices and the mesh")
        transform = icp_point_to_plane(
            np.asarray(scan, dtype=np.float64), np.asarray(vertices, dtype=np.float64),
            np.asarray(triangles), transform, iterations, tolerance,
        )  # fmt: skip
    return transform
