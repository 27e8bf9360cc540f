"""
Exact point-to-triangle distances.

The closest point on a triangle follows the Voronoi-region walk of Ericson's
ClosestPtPointTriangle (vertex, edge and face regions), vectorized over
(point, triangle) pairs. TriangleIndex prunes candidates with a KD-tree over
triangle centroids; the pruning is exact because every triangle lies inside the
ball of its bounding radius around its centroid.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..common.errors import EmptyMeshError
from ..common.settings import Settings

logger = logging.getLogger(__name__)

# (point, triangle) pairs evaluated per batch
PAIR_CHUNK = 1 << 20


def closest_point_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Closest point to p[i] on triangle (a[i], b[i], c[i]); all inputs (N, 3)"""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(p)
    done = np.zeros(p.shape[0], dtype=bool)

    def assign(region, value):
        region = region & ~done
        out[region] = value[region] if value.ndim == 2 else value
        done[region] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        assign((d1 <= 0) & (d2 <= 0), a)
        assign((d3 >= 0) & (d4 <= d3), b)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + (d1 / (d1 - d3))[:, None] * ab)
        assign((d6 >= 0) & (d5 <= d6), c)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + (d2 / (d2 - d6))[:, None] * ac)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        assign((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + w_bc[:, None] * (c - b))
        denom = 1.0 / (va + vb + vc)
        interior = a + (vb * denom)[:, None] * ab + (vc * denom)[:, None] * ac
    rest = ~done
    out[rest] = interior[rest]
    # zero-area triangles can leave nan; such a triangle is the union of its edges
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        q, qa, qb, qc = p[bad], a[bad], b[bad], c[bad]
        edges = ((qa, qb), (qb, qc), (qc, qa))
        candidates = np.stack([closest_point_on_segments(q, s, e) for s, e in edges], axis=1)
        nearest = np.argmin(((candidates - q[:, None]) ** 2).sum(axis=2), axis=1)
        out[bad] = candidates[np.arange(candidates.shape[0]), nearest]
    return out


def closest_point_on_segments(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Closest point to p[i] on segment [a[i], b[i]]; zero-length segments give a[i]"""
    ab = b - a
    length2 = np.einsum("ij,ij->i", ab, ab)
    along = np.einsum("ij,ij->i", p - a, ab)
    t = np.divide(along, length2, out=np.zeros_like(along), where=length2 > 0)
    return a + np.clip(t, 0.0, 1.0)[:, None] * ab


def _check_mesh(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    if vertices.shape[0] == 0 or triangles.shape[0] == 0:
        raise EmptyMeshError("mesh has no triangles")
    return vertices, triangles


def _pair_distances(points, corners, point_ids, tri_ids) -> tuple[np.ndarray, np.ndarray]:
    closest = np.empty((point_ids.size, 3))
    for start in range(0, point_ids.size, PAIR_CHUNK):
        sl = slice(start, start + PAIR_CHUNK)
        tri = corners[tri_ids[sl]]
        closest[sl] = closest_point_on_triangles(points[point_ids[sl]], tri[:, 0], tri[:, 1], tri[:, 2])
    return np.linalg.norm(points[point_ids] - closest, axis=1), closest


def _reduce(n_points, point_ids, tri_ids, distances, closest):
    """Per point minimum; ties go to the lower triangle id"""
    order = np.lexsort((tri_ids, distances, point_ids))
    first = np.ones(order.size, dtype=bool)
    first[1:] = point_ids[order][1:] != point_ids[order][:-1]
    keep = order[first]
    out_d = np.full(n_points, np.inf)
    out_t = np.full(n_points, -1, dtype=np.int64)
    out_p = np.zeros((n_points, 3))
    out_d[point_ids[keep]] = distances[keep]
    out_t[point_ids[keep]] = tri_ids[keep]
    out_p[point_ids[keep]] = closest[keep]
    return out_d, out_t, out_p


@dataclass(frozen=True, eq=False)
class TriangleIndex:
    """Immutable spatial index over the triangles of one mesh"""

    vertices: np.ndarray
    triangles: np.ndarray
    corners: np.ndarray = field(init=False, repr=False)
    tree: cKDTree = field(init=False, repr=False)
    radius: float = field(init=False)

    def __post_init__(self) -> None:
        vertices, triangles = _check_mesh(self.vertices, self.triangles)
        corners = vertices[triangles]
        centroids = corners.mean(axis=1)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "tree", cKDTree(centroids))
        object.__setattr__(self, "radius", float(np.linalg.norm(corners - centroids[:, None], axis=2).max()))

    def query(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distances, triangle ids and closest surface points for every query point"""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        n = points.shape[0]
        if n == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros((0, 3))
        workers = Settings().kdtree_workers()
        _, nearest = self.tree.query(points, k=1, workers=workers)
        upper, _ = _pair_distances(points, self.corners, np.arange(n), nearest)
        # any triangle closer than `upper` has its centroid within upper + radius
        candidates = self.tree.query_ball_point(points, upper + self.radius + 1e-12, workers=workers)
        counts = np.fromiter((len(c) for c in candidates), dtype=np.int64, count=n)
        point_ids = np.repeat(np.arange(n), counts)
        tri_ids = np.concatenate([np.asarray(c, dtype=np.int64) for c in candidates]) if counts.sum() else nearest
        distances, closest = _pair_distances(points, self.corners, point_ids, tri_ids)
        logger.debug("%d points, %.1f candidate triangles per point", n, counts.mean())
        return _reduce(n, point_ids, tri_ids, distances, closest)


def closest_points(points, vertices, triangles) -> tuple[np.ndarray, np.ndarray]:
    """Closest surface points and their triangle ids"""
    _, tri_ids, closest = TriangleIndex(vertices, triangles).query(points)
    return closest, tri_ids


def scan_to_mesh_distance(scan_vertices, vertices, triangles, index: TriangleIndex | None = None) -> np.ndarray:
    """Distance from every scan vertex to the closest point of the mesh surface"""
    index = index or TriangleIndex(vertices, triangles)
    distances, _, _ = index.query(scan_vertices)
    return distances


def brute_force_distances(points, vertices, triangles) -> np.ndarray:
    """Reference implementation testing every point against every triangle"""
    vertices, triangles = _check_mesh(vertices, triangles)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    corners = vertices[triangles]
    best = np.full(points.shape[0], np.inf)
    ids = np.arange(points.shape[0])
    for t in range(triangles.shape[0]):
        distances, _ = _pair_distances(points, corners, ids, np.full(ids.size, t))
        best = np.minimum(best, distances)
    return best
