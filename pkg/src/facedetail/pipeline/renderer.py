"""
FaceRenderer: the full analysis-by-synthesis forward path for a LatentCode.

    code -> geometry -> UV position / normal maps -> albedo -> SH shading
         -> rasterization -> textured image, plus 2D / 3D landmarks

The coarse part (everything up to the UV maps and fragments) is exposed as a
CoarseState so detail renders and detail fitting can reuse it.
"""

from dataclasses import dataclass

import torch
from torch import Tensor

from ..appearance.albedo import AlbedoModel, albedo_map
from ..appearance.camera import project
from ..appearance.rasterizer import Fragments, image_shape, rasterize_points
from ..appearance.rendering import render_texture
from ..appearance.sh import shade
from ..appearance.uv import UVImage, UVLayout, normalize_masked
from ..common.errors import DimensionError
from ..detail.displacement import apply_displacement, transfer_detail_normals
from ..model_core.geometry import decode_geometry, surface_landmarks, vertex_normals
from ..model_core.head_model import ParametricHeadModel
from ..model_core.mesh import Mesh
from .code import LatentCode


@dataclass(frozen=True, eq=False)
class CoarseState:
    mesh: Mesh
    normals: Tensor  # (n, 3) vertex normals
    points: Tensor  # (n, 2) projected vertices
    fragments: Fragments
    uv_positions: Tensor  # (d, d, 3)
    uv_normals: Tensor  # (d, d, 3)
    uv_mask: Tensor  # (d, d) bool
    albedo: Tensor  # (d, d, 3)
    landmarks_3d: Tensor
    landmarks_2d: Tensor

    def detached(self) -> "CoarseState":
        return CoarseState(
            mesh=Mesh(self.mesh.vertices.detach(), self.mesh.triangles, self.mesh.uv),
            normals=self.normals.detach(),
            points=self.points.detach(),
            fragments=self.fragments,
            uv_positions=self.uv_positions.detach(),
            uv_normals=self.uv_normals.detach(),
            uv_mask=self.uv_mask,
            albedo=self.albedo.detach(),
            landmarks_3d=self.landmarks_3d.detach(),
            landmarks_2d=self.landmarks_2d.detach(),
        )


@dataclass(frozen=True, eq=False)
class RenderResult:
    image: Tensor  # (H, W, 3)
    shaded: UVImage
    state: CoarseState
    displacement: Tensor | None = None
    shading_normals: Tensor | None = None

    @property
    def coverage(self) -> Tensor:
        return self.state.fragments.coverage_tensor()

    @property
    def mesh(self) -> Mesh:
        return self.state.mesh

    @property
    def uv_mask(self) -> Tensor:
        return self.state.uv_mask

    @property
    def landmarks_2d(self) -> Tensor:
        return self.state.landmarks_2d

    @property
    def landmarks_3d(self) -> Tensor:
        return self.state.landmarks_3d


class FaceRenderer:
    def __init__(
        self,
        model: ParametricHeadModel,
        albedo_model: AlbedoModel,
        image_size=224,
        use_pose_correctives: bool = True,
    ) -> None:
        self.model = model
        self.albedo_model = albedo_model
        self.image_size = image_shape(image_size)
        self.use_pose_correctives = use_pose_correctives
        self.layout = UVLayout.build(model.triangles, model.uv, albedo_model.size)

    @property
    def uv_size(self) -> int:
        return self.layout.size

    def jaw_pose(self, code: LatentCode) -> Tensor:
        return code.jaw_pose

    def geometry(self, code: LatentCode) -> Mesh:
        return decode_geometry(
            self.model,
            code.shape,
            code.pose,
            code.expression,
            use_pose_correctives=self.use_pose_correctives,
        )

    def landmarks(self, code: LatentCode) -> tuple[Tensor, Tensor]:
        """Projected 2D and model-space 3D landmarks without rendering"""
        mesh = self.geometry(code)
        points_3d = surface_landmarks(mesh, self.model.landmark_embedding)
        return project(points_3d, code.camera), points_3d

    def coarse_state(self, code: LatentCode) -> CoarseState:
        if code.albedo.shape[0] != self.albedo_model.n_albedo:
            raise DimensionError(f"code has {code.albedo.shape[0]} albedo entries, model expects {self.albedo_model.n_albedo}")
        camera = code.camera
        mesh = self.geometry(code)
        normals = vertex_normals(mesh)
        points = project(mesh.vertices, camera)
        fragments = rasterize_points(points.detach(), mesh.vertices.detach()[:, 2], mesh.triangles, self.image_size)
        mask = self.layout.mask
        points_3d = surface_landmarks(mesh, self.model.landmark_embedding)
        return CoarseState(
            mesh=mesh,
            normals=normals,
            points=points,
            fragments=fragments,
            uv_positions=self.layout.interpolate(mesh.vertices),
            uv_normals=normalize_masked(self.layout.interpolate(normals), mask),
            uv_mask=mask,
            albedo=albedo_map(self.albedo_model, code.albedo).data,
            landmarks_3d=points_3d,
            landmarks_2d=project(points_3d, camera),
        )

    def _textured(self, state: CoarseState, shaded: UVImage) -> Tensor:
        return render_texture(
            state.points, state.mesh.triangles, state.mesh.uv, shaded.data, state.fragments, shaded.mask
        )

    def render(self, code: LatentCode, state: CoarseState | None = None) -> RenderResult:
        """Coarse render I_r"""
        state = state or self.coarse_state(code)
        shaded = shade(state.albedo, code.lighting, state.uv_normals, state.uv_mask)
        return RenderResult(image=self._textured(state, shaded), shaded=shaded, state=state)

    def render_detail(self, code: LatentCode, displacement, coarse: CoarseState | None = None) -> RenderResult:
        """Detail render I'_r: coarse geometry shaded with displacement-tilted normals"""
        state = coarse or self.coarse_state(code)
        d = displacement if isinstance(displacement, Tensor) else displacement.data
        if tuple(d.shape) != (self.uv_size, self.uv_size):
            raise DimensionError(f"displacement must be {self.uv_size}x{self.uv_size}, got {tuple(d.shape)}")
        displaced = apply_displacement(state.uv_positions, state.uv_normals, d, state.uv_mask)
        normals = transfer_detail_normals(state.uv_normals, state.uv_positions, displaced, state.uv_mask)
        shaded = shade(state.albedo, code.lighting, normals, state.uv_mask)
        return RenderResult(
            image=self._textured(state, shaded),
            shaded=shaded,
            state=state,
            displacement=d,
            shading_normals=normals.data,
        )
