"""
Hard z-buffer rasterizer over pixel centres.

- Pixel (row r, column c) has its centre at (c + 0.5, r + 0.5) in image units.
- Larger depth is closer to the viewer; equal depths go to the lower triangle id.
- A pixel centre is covered when all three barycentric weights are >= 0; triangles
  with (near) zero projected area are skipped.

Rasterization runs on detached numpy arrays: coverage and triangle ids are
piecewise constant, and the differentiable renderer recomputes barycentrics in torch.
"""

from dataclasses import dataclass

import numpy as np
import torch

from ..common.tensors import to_numpy
from ..model_core.mesh import Mesh
from .camera import Camera, project

DEGENERATE_AREA = 1e-12
# candidate fragments are generated in chunks of roughly this many entries
CHUNK = 1 << 21


@dataclass(frozen=True)
class ScanResult:
    pixel: np.ndarray  # (F,) flat pixel index
    face: np.ndarray  # (F,)
    barycentric: np.ndarray  # (F, 3)
    depth: np.ndarray  # (F,)


@dataclass(frozen=True, eq=False)
class Fragments:
    face: np.ndarray  # (H, W) triangle id, -1 on background
    barycentric: np.ndarray  # (H, W, 3)
    depth: np.ndarray  # (H, W), -inf on background

    @property
    def height(self) -> int:
        return int(self.face.shape[0])

    @property
    def width(self) -> int:
        return int(self.face.shape[1])

    @property
    def coverage(self) -> np.ndarray:
        return self.face >= 0

    @property
    def pixel_ids(self) -> np.ndarray:
        """Flat indices of covered pixels in row-major order"""
        return np.flatnonzero(self.face.reshape(-1) >= 0)

    def coverage_tensor(self) -> torch.Tensor:
        return torch.from_numpy(self.coverage.copy())


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def image_shape(image_size) -> tuple[int, int]:
    if isinstance(image_size, int):
        return image_size, image_size
    height, width = image_size
    return int(height), int(width)


def scan_triangles(
    points: np.ndarray, depth: np.ndarray | None, triangles: np.ndarray, height: int, width: int
) -> ScanResult:
    """All (pixel, triangle) pairs whose pixel centre lies inside the projected triangle"""
    empty = ScanResult(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, 3)), np.zeros(0))
    if triangles.shape[0] == 0 or height < 1 or width < 1:
        return empty
    corners = points[triangles]  # (m, 3, 2)
    ax, ay = corners[:, 0, 0], corners[:, 0, 1]
    bx, by = corners[:, 1, 0], corners[:, 1, 1]
    cx, cy = corners[:, 2, 0], corners[:, 2, 1]
    area = _edge(ax, ay, bx, by, cx, cy)

    col_min = np.clip(np.ceil(corners[..., 0].min(axis=1) - 0.5), 0, width).astype(np.int64)
    col_max = np.clip(np.floor(corners[..., 0].max(axis=1) - 0.5), -1, width - 1).astype(np.int64)
    row_min = np.clip(np.ceil(corners[..., 1].min(axis=1) - 0.5), 0, height).astype(np.int64)
    row_max = np.clip(np.floor(corners[..., 1].max(axis=1) - 0.5), -1, height - 1).astype(np.int64)
    n_cols = np.clip(col_max - col_min + 1, 0, None)
    n_rows = np.clip(row_max - row_min + 1, 0, None)
    counts = np.where(np.abs(area) < DEGENERATE_AREA, 0, n_cols * n_rows)

    results = []
    bounds = np.cumsum(counts)
    start_face = 0
    while start_face < counts.size:
        # take faces until the chunk budget is reached (always at least one)
        base = bounds[start_face - 1] if start_face else 0
        stop_face = max(int(np.searchsorted(bounds, base + CHUNK, side="right")), start_face + 1)
        faces = np.arange(start_face, min(stop_face, counts.size))
        results.append(_scan_chunk(faces, counts, col_min, n_cols, row_min, area, corners, depth, triangles, width))
        start_face = faces[-1] + 1
    results = [r for r in results if r.pixel.size]
    if not results:
        return empty
    return ScanResult(
        pixel=np.concatenate([r.pixel for r in results]),
        face=np.concatenate([r.face for r in results]),
        barycentric=np.concatenate([r.barycentric for r in results]),
        depth=np.concatenate([r.depth for r in results]),
    )


def _scan_chunk(faces, counts, col_min, n_cols, row_min, area, corners, depth, triangles, width) -> ScanResult:
    chunk_counts = counts[faces]
    total = int(chunk_counts.sum())
    face = np.repeat(faces, chunk_counts)
    offset = np.arange(total) - np.repeat(np.cumsum(chunk_counts) - chunk_counts, chunk_counts)
    col = col_min[face] + offset % np.maximum(n_cols[face], 1)
    row = row_min[face] + offset // np.maximum(n_cols[face], 1)
    px, py = col + 0.5, row + 0.5

    tri = corners[face]
    w0 = _edge(tri[:, 1, 0], tri[:, 1, 1], tri[:, 2, 0], tri[:, 2, 1], px, py)
    w1 = _edge(tri[:, 2, 0], tri[:, 2, 1], tri[:, 0, 0], tri[:, 0, 1], px, py)
    w2 = _edge(tri[:, 0, 0], tri[:, 0, 1], tri[:, 1, 0], tri[:, 1, 1], px, py)
    bary = np.stack([w0, w1, w2], axis=1) / area[face][:, None]
    inside = np.all(bary >= 0.0, axis=1)

    face, bary = face[inside], bary[inside]
    pixel = row[inside] * width + col[inside]
    if depth is None:
        z = np.zeros(face.size)
    else:
        z = (bary * depth[triangles[face]]).sum(axis=1)
    return ScanResult(pixel, face, bary, z)


def resolve_depth(scan: ScanResult, height: int, width: int) -> Fragments:
    """Keep the closest fragment per pixel (larger depth wins, then lower triangle id)"""
    face_buf = np.full(height * width, -1, dtype=np.int64)
    bary_buf = np.zeros((height * width, 3), dtype=np.float64)
    depth_buf = np.full(height * width, -np.inf, dtype=np.float64)
    if scan.pixel.size:
        order = np.lexsort((scan.face, -scan.depth, scan.pixel))
        pixel = scan.pixel[order]
        first = np.ones(pixel.size, dtype=bool)
        first[1:] = pixel[1:] != pixel[:-1]
        keep = order[first]
        face_buf[scan.pixel[keep]] = scan.face[keep]
        bary_buf[scan.pixel[keep]] = scan.barycentric[keep]
        depth_buf[scan.pixel[keep]] = scan.depth[keep]
    return Fragments(
        face=face_buf.reshape(height, width),
        barycentric=bary_buf.reshape(height, width, 3),
        depth=depth_buf.reshape(height, width),
    )


def rasterize_points(points, depth, triangles, image_size) -> Fragments:
    height, width = image_shape(image_size)
    scan = scan_triangles(
        to_numpy(points).astype(np.float64),
        to_numpy(depth).astype(np.float64),
        to_numpy(triangles).astype(np.int64),
        height,
        width,
    )
    return resolve_depth(scan, height, width)


def rasterize(mesh: Mesh, camera: Camera, image_size) -> Fragments:
    """Project with the orthographic camera and z-buffer every triangle"""
    points = project(mesh.vertices.detach(), camera.detached())
    return rasterize_points(points, mesh.vertices.detach()[:, 2], mesh.triangles, image_size)
