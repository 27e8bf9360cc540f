"""
UV-space images and the texel -> (triangle, barycentric) layout used to resample
per-vertex attributes.

Texel (i, j) of a d x d map has its centre at (u, v) = ((j + 0.5) / d, (i + 0.5) / d),
so rows follow v and columns follow u.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
import torch
from torch import Tensor

from ..common.errors import DimensionError, NonUnitNormalError
from ..common.mixins import MapExportMixin, TensorFieldsMixin
from ..common.tensors import to_numpy
from ..model_core.mesh import Mesh
from .rasterizer import scan_triangles

logger = logging.getLogger(__name__)

INTERIOR_EPS = 1e-9
UNIT_TOL = 1e-6


class MapTag(str, Enum):
    ALBEDO = "albedo"
    POSITION = "position"
    NORMAL = "normal"
    DISPLACEMENT = "displacement"
    MASK = "mask"
    SHADED = "shaded"


@dataclass(frozen=True, eq=False)
class UVImage(MapExportMixin, TensorFieldsMixin):
    data: Tensor  # (d, d, c)
    tag: MapTag
    mask: Tensor | None = None  # (d, d) bool

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.data.shape[0] != self.data.shape[1]:
            raise DimensionError(f"UV maps must be (d, d, c), got {tuple(self.data.shape)}")
        if self.mask is not None and tuple(self.mask.shape) != tuple(self.data.shape[:2]):
            raise DimensionError("UV mask must match the map resolution")
        if self.tag == MapTag.NORMAL and self.mask is not None:
            check_unit(self.data, self.mask)

    @property
    def size(self) -> int:
        return int(self.data.shape[0])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])


def check_unit(normals: Tensor, mask: Tensor | None = None, tol: float = UNIT_TOL) -> None:
    lengths = torch.linalg.norm(normals.detach(), dim=-1)
    if mask is not None:
        lengths = lengths[mask.bool()]
    if lengths.numel() and float((lengths - 1.0).abs().max()) > tol:
        raise NonUnitNormalError(f"normals must have unit length within {tol}")


def normalize_masked(vectors: Tensor, mask: Tensor) -> Tensor:
    """Unit vectors inside the mask, zero outside (gradient-safe)"""
    m = mask.bool()[..., None]
    length = torch.linalg.norm(vectors, dim=-1, keepdim=True)
    safe = torch.where(m & (length > 0), length, torch.ones_like(length))
    return torch.where(m, vectors / safe, torch.zeros_like(vectors))


@dataclass(frozen=True, eq=False)
class UVLayout:
    """Cached texel coverage of a mesh's UV triangles"""

    size: int
    face: Tensor  # (d, d) long, -1 where no triangle covers the texel
    barycentric: Tensor  # (d, d, 3)
    triangles: Tensor  # (m, 3)
    overlaps: int

    @property
    def mask(self) -> Tensor:
        return self.face >= 0

    @classmethod
    def build(cls, triangles: Tensor, uv: Tensor, size: int) -> "UVLayout":
        return _cached_layout(int(size), _Key(to_numpy(triangles)), _Key(to_numpy(uv)))

    @classmethod
    def for_mesh(cls, mesh: Mesh, size: int) -> "UVLayout":
        return cls.build(mesh.triangles, mesh.uv, size)

    def interpolate(self, attribute: Tensor) -> Tensor:
        """Per-vertex (n, c) attribute to a (d, d, c) map, zero outside the layout"""
        d = self.size
        flat_face = self.face.reshape(-1)
        inside = flat_face >= 0
        corners = attribute[self.triangles[flat_face[inside]]]  # (T, 3, c)
        bary = self.barycentric.reshape(-1, 3)[inside].to(attribute.dtype)
        values = (bary[..., None] * corners).sum(dim=1)
        out = attribute.new_zeros((d * d, attribute.shape[-1]))
        out = out.index_put((torch.nonzero(inside)[:, 0],), values)
        return out.reshape(d, d, -1)


class _Key:
    """Hashable wrapper around an array for the layout cache"""

    def __init__(self, array: np.ndarray) -> None:
        self.array = np.ascontiguousarray(array)
        self._hash = hash((self.array.shape, self.array.dtype.str, self.array.tobytes()))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, _Key)
            and self.array.shape == other.array.shape
            and np.array_equal(self.array, other.array)
        )


@lru_cache(maxsize=32)
def _cached_layout(size: int, triangles: _Key, uv: _Key) -> UVLayout:
    if size < 1:
        raise DimensionError("UV size must be >= 1")
    tri = triangles.array.astype(np.int64)
    points = uv.array.astype(np.float64) * size
    scan = scan_triangles(points, None, tri, size, size)

    # first writer wins: the lowest triangle id covering a texel keeps it
    order = np.lexsort((scan.face, scan.pixel))
    pixel, face, bary = scan.pixel[order], scan.face[order], scan.barycentric[order]
    first = np.ones(pixel.size, dtype=bool)
    first[1:] = pixel[1:] != pixel[:-1]

    interior = bary.min(axis=1) > INTERIOR_EPS
    texels, counts = np.unique(pixel[interior], return_counts=True)
    overlaps = int((counts > 1).sum())
    if overlaps:
        logger.warning("UV layout has %d texels covered by overlapping triangles", overlaps)

    face_map = np.full(size * size, -1, dtype=np.int64)
    bary_map = np.zeros((size * size, 3), dtype=np.float64)
    face_map[pixel[first]] = face[first]
    bary_map[pixel[first]] = bary[first]
    return UVLayout(
        size=size,
        face=torch.from_numpy(face_map.reshape(size, size)),
        barycentric=torch.from_numpy(bary_map.reshape(size, size, 3)),
        triangles=torch.from_numpy(tri),
        overlaps=overlaps,
    )


def mesh_to_uv(
    mesh: Mesh,
    attribute: Tensor,
    size: int,
    tag: MapTag = MapTag.POSITION,
    layout: UVLayout | None = None,
) -> UVImage:
    """Resample a per-vertex attribute into UV space; normal maps are renormalized"""
    layout = layout or UVLayout.for_mesh(mesh, size)
    if attribute.ndim == 1:
        attribute = attribute[:, None]
    if attribute.shape[0] != mesh.n_vertices:
        raise DimensionError("attribute must have one row per vertex")
    data = layout.interpolate(attribute)
    if tag == MapTag.NORMAL:
        data = normalize_masked(data, layout.mask)
    return UVImage(data=data, tag=tag, mask=layout.mask)
