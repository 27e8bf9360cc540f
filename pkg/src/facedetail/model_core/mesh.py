from dataclasses import dataclass

import torch
from torch import Tensor

from ..common.mixins import ObjExportMixin, TensorFieldsMixin


@dataclass(frozen=True, eq=False)
class Mesh(ObjExportMixin, TensorFieldsMixin):
    """Triangle mesh with per-vertex UVs and optional unit normals"""

    vertices: Tensor
    triangles: Tensor
    uv: Tensor
    normals: Tensor | None = None

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def with_vertices(self, vertices: Tensor) -> "Mesh":
        return Mesh(vertices=vertices, triangles=self.triangles, uv=self.uv)

    def with_normals(self, normals: Tensor) -> "Mesh":
        return Mesh(vertices=self.vertices, triangles=self.triangles, uv=self.uv, normals=normals)

    def normals_are_unit(self, tol: float = 1e-6) -> bool:
        if self.normals is None:
            return True
        lengths = torch.linalg.norm(self.normals.detach(), dim=-1)
        return bool(torch.all((lengths - 1.0).abs() <= tol))
