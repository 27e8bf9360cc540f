from torch import Tensor

from ..appearance.camera import Camera
from ..appearance.rasterizer import Fragments
from ..appearance.rendering import render
from ..appearance.sh import Lighting, shade
from ..appearance.uv import UVImage
from ..model_core.mesh import Mesh


def render_detail(
    mesh: Mesh,
    albedo: UVImage | Tensor,
    light: Lighting | Tensor,
    normals: UVImage,
    camera: Camera,
    image_size,
    fragments: Fragments | None = None,
) -> Tensor:
    """Coarse geometry rasterized with shading evaluated on the detail normal map"""
    shaded = shade(albedo, light, normals, normals.mask)
    return render(mesh, shaded, camera, image_size, fragments=fragments)
