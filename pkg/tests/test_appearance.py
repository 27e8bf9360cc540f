import numpy as np
import pytest
import torch

from src.facedetail.appearance import (
    AlbedoModel,
    Camera,
    Lighting,
    UVLayout,
    albedo_map,
    mesh_to_uv,
    project,
    rasterize_points,
    sh_basis,
    shade,
)
from src.facedetail.appearance.sh import SH_C0
from src.facedetail.appearance.uv import MapTag
from src.facedetail.common.errors import ConfigurationError, NonUnitNormalError
from src.facedetail.model_core import Mesh

F64 = torch.float64


def _square_mesh():
    """Two triangles covering the unit UV square, lying in z = 0"""
    uv = torch.tensor([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], dtype=F64)
    vertices = torch.cat([uv, torch.zeros(4, 1, dtype=F64)], dim=1)
    return Mesh(vertices, torch.tensor([[0, 1, 2], [0, 2, 3]]), uv)


def _interior_pixels(coverage: torch.Tensor, erode: int = 3) -> torch.Tensor:
    inside = coverage.clone()
    for _ in range(erode):
        shrunk = inside.clone()
        shrunk[1:] &= inside[:-1]
        shrunk[:-1] &= inside[1:]
        shrunk[:, 1:] &= inside[:, :-1]
        shrunk[:, :-1] &= inside[:, 1:]
        shrunk[0, :] = shrunk[-1, :] = shrunk[:, 0] = shrunk[:, -1] = False
        inside = shrunk
    return torch.nonzero(inside)


class TestAlbedo:
    """
    Tests the linear albedo model.
    - alpha = 0 returns the mean.
    - A uniform basis vector shifts every texel by its coefficient.
    """
    def test_zero_alpha(self, toy_albedo):
        data = albedo_map(toy_albedo, torch.zeros(toy_albedo.n_albedo)).data
        assert torch.equal(data, toy_albedo.mean)

    def test_uniform_basis(self):
        mean = torch.full((4, 4, 3), 0.5, dtype=F64)
        basis = torch.zeros(4, 4, 3, 2, dtype=F64)
        basis[..., 0] = 0.2
        data = albedo_map(AlbedoModel(mean, basis), [1.0, 0.0]).data
        assert torch.allclose(data, torch.full_like(mean, 0.7))


class TestSphericalHarmonics:
    """
    Tests the second-order SH basis and Lambertian shading.
    - Basis values at +z and -z match the stated polynomials.
    - Zero lighting shades to zero; band-0 ambient light ignores the normals.
    - Non-unit normals are rejected.
    """
    def test_basis_up(self):
        values = sh_basis(torch.tensor([0.0, 0.0, 1.0], dtype=F64))
        expected = torch.tensor([0.282095, 0, 0.488603, 0, 0, 0, 0.630784, 0, 0], dtype=F64)
        assert torch.allclose(values, expected, atol=1e-12)

    def test_basis_parity(self):
        up = sh_basis(torch.tensor([0.0, 0.0, 1.0], dtype=F64))
        down = sh_basis(torch.tensor([0.0, 0.0, -1.0], dtype=F64))
        assert down[2] == -up[2]
        assert down[6] == up[6]
        assert down[0] == up[0]

    def test_zero_light(self):
        normals = torch.zeros(2, 2, 3, dtype=F64)
        normals[..., 2] = 1.0
        mask = torch.ones(2, 2, dtype=torch.bool)
        shaded = shade(torch.ones(2, 2, 3, dtype=F64), torch.zeros(27, dtype=F64), normals, mask)
        assert torch.equal(shaded.data, torch.zeros(2, 2, 3, dtype=F64))
        assert shaded.tag == MapTag.SHADED

    def test_ambient_light(self):
        normals = torch.nn.functional.normalize(torch.randn(3, 3, 3, dtype=F64), dim=-1)
        mask = torch.ones(3, 3, dtype=torch.bool)
        shaded = shade(torch.ones(3, 3, 3, dtype=F64), Lighting.ambient(0.8), normals, mask)
        assert torch.allclose(shaded.data, torch.full((3, 3, 3), 0.8, dtype=F64))

    def test_non_unit_normals(self):
        with pytest.raises(NonUnitNormalError):
            sh_basis(torch.tensor([0.0, 0.0, 2.0], dtype=F64))


class TestCamera:
    """
    Tests the scaled orthographic camera.
    - Identity camera keeps (x, y); z never enters the projection.
    - Scale 2, translation (1, -1) maps (3, 4, 9) to (7, 7).
    - Non-positive scales are rejected.
    """
    def test_identity(self):
        points = torch.tensor([[1.5, -2.0, 7.0]], dtype=F64)
        assert torch.equal(project(points, Camera.identity()), points[:, :2])

    def test_scaled(self):
        camera = Camera(torch.tensor(2.0), torch.tensor([1.0, -1.0]))
        assert project(torch.tensor([3.0, 4.0, 9.0], dtype=F64), camera).tolist() == [7.0, 7.0]

    def test_rejects_zero_scale(self):
        with pytest.raises(ConfigurationError):
            Camera(torch.tensor(0.0), torch.zeros(2))


class TestUVLayout:
    """
    Tests resampling of per-vertex attributes into UV space.
    - A constant attribute on the full square gives a constant map and a full mask.
    - A linear attribute matches the texel-centre coordinates exactly.
    - Texels outside every UV triangle are masked out.
    """
    def test_constant_attribute(self):
        mesh = _square_mesh()
        image = mesh_to_uv(mesh, torch.full((4, 1), 0.25, dtype=F64), 8)
        assert bool(image.mask.all())
        assert torch.allclose(image.data, torch.full((8, 8, 1), 0.25, dtype=F64), atol=1e-15)

    def test_linear_attribute(self):
        mesh = _square_mesh()
        d = 16
        image = mesh_to_uv(mesh, mesh.uv, d)
        centres = (torch.arange(d, dtype=F64) + 0.5) / d
        assert torch.allclose(image.data[..., 0], centres[None, :].expand(d, d), atol=1e-12)
        assert torch.allclose(image.data[..., 1], centres[:, None].expand(d, d), atol=1e-12)

    def test_uncovered_texels(self):
        uv = torch.tensor([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], dtype=F64)
        layout = UVLayout.build(torch.tensor([[0, 1, 2]]), uv, 8)
        assert bool(layout.mask[0, 0])
        assert not bool(layout.mask[7, 7])
        assert layout.overlaps == 0


class TestRasterizer:
    """
    Tests the z-buffer rasterizer.
    - Coverage matches the point-in-triangle test at pixel centres.
    - The closer of two stacked triangles wins every shared pixel.
    - An empty mesh covers nothing.
    """
    def test_pixel_centre_oracle(self):
        points = torch.tensor([[2.2, 2.2], [2.9, 2.2], [2.5, 3.9]], dtype=F64)
        fragments = rasterize_points(points, torch.zeros(3), torch.tensor([[0, 1, 2]]), 8)
        covered = {tuple(p) for p in np.argwhere(fragments.coverage).tolist()}
        assert covered == {(2, 2), (3, 2)}

    def test_nearer_triangle_wins(self):
        points = torch.tensor([[0, 0], [8, 0], [0, 8], [0, 0], [8, 0], [0, 8]], dtype=F64)
        depth = torch.tensor([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        fragments = rasterize_points(points, depth, torch.tensor([[0, 1, 2], [3, 4, 5]]), 8)
        covered = fragments.face[fragments.coverage]
        assert covered.size > 0
        assert np.all(covered == 1)

    def test_equal_depth_lower_id(self):
        points = torch.tensor([[0, 0], [8, 0], [0, 8]], dtype=F64)
        fragments = rasterize_points(points, torch.zeros(3), torch.tensor([[0, 1, 2], [2, 1, 0]]), 8)
        assert np.all(fragments.face[fragments.coverage] == 0)

    def test_empty_mesh(self):
        fragments = rasterize_points(torch.zeros(0, 2), torch.zeros(0), torch.zeros(0, 3, dtype=torch.long), 8)
        assert not fragments.coverage.any()


class TestRenderPath:
    """
    Tests the differentiable render path of the face renderer.
    - Background pixels are 0.
    - A one-pixel camera shift moves the image by one pixel.
    - Pixel derivatives match finite differences for light, albedo and translation.
    - Pixel derivatives match finite differences for shape, expression, pose and scale
      at pixels well inside their triangle.
    """
    def test_background_zero(self, renderer, zero_code):
        result = renderer.render(zero_code)
        assert torch.equal(result.image[~result.coverage], torch.zeros_like(result.image[~result.coverage]))
        assert bool(result.coverage.any())

    def test_camera_shift(self, renderer, zero_code):
        base = renderer.render(zero_code)
        moved = renderer.render(zero_code.replace(translation=zero_code.translation + torch.tensor([1.0, 0.0], dtype=F64)))
        both = base.coverage[:, :-1] & moved.coverage[:, 1:]
        assert bool(both.any())
        assert torch.allclose(moved.image[:, 1:][both], base.image[:, :-1][both], atol=1e-9)

    def _pixels(self, renderer, code):
        with torch.no_grad():
            pixels = _interior_pixels(renderer.render(code).coverage)
        return pixels[:: max(len(pixels) // 8, 1)][:8]

    def test_light_and_albedo_gradients(self, renderer, zero_code):
        pixels = self._pixels(renderer, zero_code)

        def image(light, albedo):
            return renderer.render(zero_code.replace(light=light, albedo=albedo)).image[pixels[:, 0], pixels[:, 1]]

        light = zero_code.light.clone().requires_grad_(True)
        albedo = (0.1 * torch.randn(zero_code.albedo.shape, dtype=F64)).requires_grad_(True)
        assert torch.autograd.gradcheck(image, (light, albedo), eps=1e-6, atol=1e-7)

    def test_translation_gradient(self, renderer, zero_code):
        pixels = self._pixels(renderer, zero_code)

        def image(translation):
            return renderer.render(zero_code.replace(translation=translation)).image[pixels[:, 0], pixels[:, 1]]

        translation = (zero_code.translation + 0.137).requires_grad_(True)
        assert torch.autograd.gradcheck(image, (translation,), eps=1e-7, atol=1e-5, rtol=1e-3)

    def _geometry_pixels(self, renderer, code):
        with torch.no_grad():
            fragments = renderer.coarse_state(code).fragments
        inside = torch.zeros(fragments.face.shape, dtype=torch.bool)
        inside[tuple(_interior_pixels(torch.from_numpy(fragments.face >= 0)).T)] = True
        inside &= torch.from_numpy((fragments.barycentric > 0.05).all(axis=2))
        pixels = torch.nonzero(inside)
        return pixels[:: max(len(pixels) // 8, 1)][:8]

    @pytest.mark.parametrize("field", ["shape", "expression", "pose", "scale"])
    def test_geometry_gradients(self, renderer, zero_code, field):
        g = torch.Generator().manual_seed(1)
        base = zero_code.replace(
            shape=0.1 * torch.randn(zero_code.shape.shape, generator=g, dtype=F64),
            pose=0.05 * torch.randn(zero_code.pose.shape, generator=g, dtype=F64),
        )
        pixels = self._geometry_pixels(renderer, base)
        assert len(pixels) > 0

        def image(value):
            return renderer.render(base.replace(**{field: value})).image[pixels[:, 0], pixels[:, 1]]

        value = getattr(base, field).clone().requires_grad_(True)
        eps = 1e-7 if field == "pose" else 1e-6
        assert torch.autograd.gradcheck(image, (value,), eps=eps, atol=1e-5, rtol=1e-3)
