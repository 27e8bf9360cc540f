"""
Displacement application, finite-difference detail normals and the displaced mesh.

UV maps are indexed [row, column] = [v, u]. Tangents are taken along columns (u)
and rows (v) with central differences, falling back to one-sided differences at
mask borders.
"""

import logging

import torch
from torch import Tensor

from ..appearance.rendering import sample_texture
from ..appearance.uv import MapTag, UVImage, normalize_masked
from ..common.errors import DegenerateNormalError, DimensionError
from ..model_core.geometry import vertex_normals
from ..model_core.mesh import Mesh
from .decoder import DisplacementMap

logger = logging.getLogger(__name__)

DEGENERATE_CROSS = 1e-20


def _data(value) -> Tensor:
    return value.data if isinstance(value, (UVImage, DisplacementMap)) else value


def apply_displacement(positions, normals, displacement, mask: Tensor) -> UVImage:
    """M' = M + D * N inside the mask, M elsewhere"""
    m, n, d = _data(positions), _data(normals), _data(displacement)
    if d.ndim == 3:
        d = d[..., 0]
    if m.shape != n.shape or tuple(d.shape) != tuple(m.shape[:2]) or tuple(mask.shape) != tuple(m.shape[:2]):
        raise DimensionError("positions, normals, displacement and mask must share the UV resolution")
    inside = mask.bool()[..., None]
    displaced = torch.where(inside, m + d[..., None] * n, m)
    return UVImage(data=displaced, tag=MapTag.POSITION, mask=mask.bool())


def _axis_difference(values: Tensor, mask: Tensor, dim: int) -> Tensor:
    """Central difference along dim where both neighbours are valid, one-sided otherwise"""
    size = values.shape[dim]
    shifted_mask_next = torch.zeros_like(mask)
    shifted_mask_prev = torch.zeros_like(mask)
    idx_next = torch.arange(1, size)
    idx_prev = torch.arange(0, size - 1)
    shifted_mask_next.index_copy_(dim, idx_prev, mask.index_select(dim, idx_next))
    shifted_mask_prev.index_copy_(dim, idx_next, mask.index_select(dim, idx_prev))
    has_next = mask & shifted_mask_next
    has_prev = mask & shifted_mask_prev

    value_next = torch.cat([values.narrow(dim, 1, size - 1), values.narrow(dim, size - 1, 1)], dim=dim)
    value_prev = torch.cat([values.narrow(dim, 0, 1), values.narrow(dim, 0, size - 1)], dim=dim)
    central = 0.5 * (value_next - value_prev)
    forward = value_next - values
    backward = values - value_prev
    zero = torch.zeros_like(values)
    both, only_next, only_prev = (x[..., None] for x in (has_next & has_prev, has_next & ~has_prev, has_prev & ~has_next))
    return torch.where(both, central, torch.where(only_next, forward, torch.where(only_prev, backward, zero)))


def finite_difference_normals(
    positions: Tensor, mask: Tensor, reference: Tensor | None = None
) -> tuple[Tensor, Tensor]:
    """
    Normals of a (d, d, 3) position map and the mask of degenerate texels.

    With a reference normal map the result is oriented to agree with it and
    degenerate texels fall back to the reference.
    """
    mask = mask.bool()
    tangent_u = _axis_difference(positions, mask, dim=1)
    tangent_v = _axis_difference(positions, mask, dim=0)
    cross = torch.linalg.cross(tangent_u, tangent_v, dim=-1)
    length_sq = (cross * cross).sum(dim=-1)
    degenerate = mask & (length_sq.detach() <= DEGENERATE_CROSS)
    usable = mask & ~degenerate
    normals = normalize_masked(cross, usable)
    if reference is None:
        if bool(degenerate.any()):
            raise DegenerateNormalError(f"{int(degenerate.sum())} texels have degenerate tangents")
        return normals, degenerate
    agree = (normals * reference).sum(dim=-1, keepdim=True).detach() >= 0
    normals = torch.where(agree, normals, -normals)
    normals = torch.where(degenerate[..., None], reference, normals)
    return normals, degenerate


def detail_normals(displaced, mask: Tensor, coarse_normals=None) -> UVImage:
    """Normals of M'_uv; degenerate texels take the coarse normal and are counted"""
    reference = None if coarse_normals is None else _data(coarse_normals)
    normals, degenerate = finite_difference_normals(_data(displaced), mask, reference)
    count = int(degenerate.sum())
    if count:
        logger.warning("%d detail-normal texels fell back to the coarse normal", count)
    return UVImage(data=normals, tag=MapTag.NORMAL, mask=mask.bool())


def transfer_detail_normals(coarse_normals, positions, displaced, mask: Tensor) -> UVImage:
    """
    Shading normals for the detail render: the coarse normal map tilted by the
    difference between the finite-difference normals of M'_uv and M_uv.

    Texels whose tilt is exactly zero keep the coarse normal unchanged.
    """
    n_coarse = _data(coarse_normals)
    mask = mask.bool()
    fd_coarse, _ = finite_difference_normals(_data(positions), mask, n_coarse)
    fd_detail, degenerate = finite_difference_normals(_data(displaced), mask, n_coarse)
    if bool(degenerate.any()):
        logger.warning("%d detail-normal texels fell back to the coarse normal", int(degenerate.sum()))
    tilt = fd_detail - fd_coarse
    tilted = normalize_masked(n_coarse + tilt, mask)
    unchanged = (tilt.detach() == 0).all(dim=-1, keepdim=True)
    return UVImage(data=torch.where(unchanged, n_coarse, tilted), tag=MapTag.NORMAL, mask=mask)


def detail_mesh(mesh: Mesh, displacement, normals: Tensor | None = None) -> Mesh:
    """Vertices pushed along their normals by D sampled at the vertex UVs"""
    d = _data(displacement)
    if d.ndim == 2:
        d = d[..., None]
    normals = vertex_normals(mesh) if normals is None else normals
    offsets = sample_texture(d, mesh.uv.to(d.dtype))[:, 0]
    return Mesh(
        vertices=mesh.vertices + offsets[:, None] * normals,
        triangles=mesh.triangles,
        uv=mesh.uv,
    )
