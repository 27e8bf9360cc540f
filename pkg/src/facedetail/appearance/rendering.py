"""
Differentiable texture rendering on top of the hard rasterizer.

For every covered pixel the barycentric weights are recomputed in torch from the
projected triangle, so image values carry gradients with respect to the vertices,
the camera and the shaded texture while visibility stays fixed.
"""

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor

from ..common.tensors import as_index
from ..model_core.mesh import Mesh
from .camera import Camera, project
from .rasterizer import Fragments, image_shape, rasterize_points
from .uv import UVImage

MASK_EPS = 1e-8


def pixel_barycentrics(points: Tensor, triangles: Tensor, fragments: Fragments) -> tuple[Tensor, Tensor]:
    """Covered pixel indices and their barycentric weights (P, 3) as a function of points"""
    pixel_ids = torch.from_numpy(fragments.pixel_ids)
    faces = torch.from_numpy(fragments.face.reshape(-1)[fragments.pixel_ids])
    width = fragments.width
    px = (pixel_ids % width).to(points.dtype) + 0.5
    py = torch.div(pixel_ids, width, rounding_mode="floor").to(points.dtype) + 0.5
    corners = points[as_index(triangles)[faces]]  # (P, 3, 2)
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]

    def edge(p, q, x, y):
        return (q[:, 0] - p[:, 0]) * (y - p[:, 1]) - (q[:, 1] - p[:, 1]) * (x - p[:, 0])

    area = edge(a, b, c[:, 0], c[:, 1])
    weights = torch.stack([edge(b, c, px, py), edge(c, a, px, py), edge(a, b, px, py)], dim=1)
    return pixel_ids, weights / area[:, None]


def sample_texture(texture: Tensor, uv: Tensor, mask: Tensor | None = None) -> Tensor:
    """
    Bilinear lookup of a (d, d, c) texture at (P, 2) uv coordinates.

    - u follows columns, v follows rows; texel centres sit at (j + 0.5) / d
    - with a mask, the result is normalized by the sampled mask so texels outside
      the layout never bleed into the value
    """
    if uv.shape[0] == 0:
        return texture.new_zeros((0, texture.shape[-1]))
    grid = (2.0 * uv - 1.0).to(texture.dtype).reshape(1, 1, -1, 2)
    image = texture.permute(2, 0, 1)[None]
    sampled = F.grid_sample(image, grid, mode="bilinear", padding_mode="border", align_corners=False)
    values = sampled[0, :, 0].transpose(0, 1)
    if mask is None:
        return values
    weight_image = mask.to(texture.dtype)[None, None]
    weight = F.grid_sample(weight_image, grid, mode="bilinear", padding_mode="border", align_corners=False)
    weight = weight[0, 0, 0][:, None]
    safe = torch.where(weight > MASK_EPS, weight, torch.ones_like(weight))
    return torch.where(weight > MASK_EPS, values / safe, torch.zeros_like(values))


def render_texture(
    points: Tensor,
    triangles: Tensor,
    uv: Tensor,
    texture: Tensor,
    fragments: Fragments,
    texture_mask: Tensor | None = None,
) -> Tensor:
    """(H, W, c) image: texture sampled at the interpolated uv of every covered pixel"""
    pixel_ids, bary = pixel_barycentrics(points, triangles, fragments)
    faces = torch.from_numpy(fragments.face.reshape(-1)[fragments.pixel_ids])
    corner_uv = uv.to(points.dtype)[as_index(triangles)[faces]]  # (P, 3, 2)
    pixel_uv = (bary[..., None] * corner_uv).sum(dim=1)
    values = sample_texture(texture, pixel_uv, texture_mask)
    image = texture.new_zeros((fragments.height * fragments.width, texture.shape[-1]))
    image = image.index_put((pixel_ids,), values.to(image.dtype))
    return image.reshape(fragments.height, fragments.width, -1)


def render(
    mesh: Mesh,
    shaded: UVImage,
    camera: Camera,
    image_size,
    fragments: Fragments | None = None,
) -> Tensor:
    """Rasterize the mesh and texture it with the shaded UV map; background is 0"""
    points = project(mesh.vertices, camera)
    if fragments is None:
        height, width = image_shape(image_size)
        fragments = rasterize_points(points.detach(), mesh.vertices.detach()[:, 2], mesh.triangles, (height, width))
    return render_texture(points, mesh.triangles, mesh.uv, shaded.data, fragments, shaded.mask)


def to_display(image: Tensor) -> np.ndarray:
    """Clamp to [0, 1] for export"""
    return image.detach().clamp(0.0, 1.0).cpu().numpy()
