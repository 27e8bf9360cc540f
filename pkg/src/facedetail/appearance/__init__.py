from .albedo import AlbedoModel, albedo_map, synthesize_toy_albedo
from .camera import Camera, project
from .rasterizer import Fragments, rasterize, rasterize_points, scan_triangles
from .rendering import pixel_barycentrics, render, render_texture, sample_texture, to_display
from .sh import Lighting, sh_basis, shade
from .uv import MapTag, UVImage, UVLayout, check_unit, mesh_to_uv, normalize_masked

__all__ = [
    "AlbedoModel",
    "Camera",
    "Fragments",
    "Lighting",
    "MapTag",
    "UVImage",
    "UVLayout",
    "albedo_map",
    "check_unit",
    "mesh_to_uv",
    "normalize_masked",
    "pixel_barycentrics",
    "project",
    "rasterize",
    "rasterize_points",
    "render",
    "render_texture",
    "sample_texture",
    "scan_triangles",
    "sh_basis",
    "shade",
    "synthesize_toy_albedo",
    "to_display",
]
