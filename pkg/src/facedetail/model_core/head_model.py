"""
The statistical head model: template, blendshape bases, skinning rig, landmark
embedding and UV layout.

- Joint 0 is the root and carries the global rotation; the remaining k joints are
  articulated (θ has 3k+3 entries, the pose-corrective basis has 9k vectors).
- Instances validate themselves on construction and are immutable afterwards, so
  one model can be shared by any number of threads.
"""

from dataclasses import dataclass

import torch
from torch import Tensor

from ..common.errors import DimensionError, ModelInvariantError, SkinningWeightsError
from ..common.mixins import TensorFieldsMixin

LANDMARK_COUNT = 68
WEIGHT_SUM_TOL = 1e-5
BARYCENTRIC_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class LandmarkEmbedding:
    faces: Tensor  # (L,) triangle index per landmark
    barycentric: Tensor  # (L, 3)

    def __len__(self) -> int:
        return int(self.faces.shape[0])


@dataclass(frozen=True, eq=False)
class ParametricHeadModel(TensorFieldsMixin):
    template: Tensor  # (n, 3)
    triangles: Tensor  # (m, 3)
    shape_basis: Tensor  # (n, 3, |β|)
    expression_basis: Tensor  # (n, 3, |ψ|)
    pose_basis: Tensor  # (n, 3, 9k)
    skinning_weights: Tensor  # (k+1, n)
    joint_regressor: Tensor  # (k+1, n)
    parents: tuple[int, ...]
    joint_names: tuple[str, ...]
    landmark_faces: Tensor  # (68,)
    landmark_barycentric: Tensor  # (68, 3)
    uv: Tensor  # (n, 2)
    eyelid_pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        self.validate()

    #################
    ## DIMENSIONS
    #################
    @property
    def n_vertices(self) -> int:
        return int(self.template.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def n_shape(self) -> int:
        return int(self.shape_basis.shape[-1])

    @property
    def n_expression(self) -> int:
        return int(self.expression_basis.shape[-1])

    @property
    def n_joints(self) -> int:
        """All joints including the root"""
        return len(self.parents)

    @property
    def n_articulated(self) -> int:
        return self.n_joints - 1

    @property
    def n_pose(self) -> int:
        return 3 * self.n_joints

    @property
    def jaw_index(self) -> int:
        if "jaw" not in self.joint_names:
            raise DimensionError("model has no joint named 'jaw'")
        return self.joint_names.index("jaw")

    @property
    def jaw_slice(self) -> slice:
        start = 3 * self.jaw_index
        return slice(start, start + 3)

    @property
    def landmark_embedding(self) -> LandmarkEmbedding:
        return LandmarkEmbedding(self.landmark_faces, self.landmark_barycentric)

    def joint_slice(self, name: str) -> slice:
        start = 3 * self.joint_names.index(name)
        return slice(start, start + 3)

    #################
    ## VALIDATION
    #################
    def validate(self) -> None:
        n = self.n_vertices
        k = self.n_articulated
        if self.template.ndim != 2 or self.template.shape[1] != 3:
            raise ModelInvariantError(f"template must be (n, 3), got {tuple(self.template.shape)}")
        for name in ("shape_basis", "expression_basis", "pose_basis"):
            basis = getattr(self, name)
            if basis.ndim != 3 or tuple(basis.shape[:2]) != (n, 3):
                raise ModelInvariantError(f"{name} must be (n, 3, K), got {tuple(basis.shape)}")
        if self.pose_basis.shape[-1] != 9 * k:
            raise ModelInvariantError(
                f"pose_basis must hold 9k={9 * k} vectors, got {self.pose_basis.shape[-1]}"
            )
        if len(self.joint_names) != self.n_joints:
            raise ModelInvariantError("joint_names and parents differ in length")
        if self.parents[0] != -1 or any(not 0 <= p < i for i, p in enumerate(self.parents) if i):
            raise ModelInvariantError(f"parents must be topologically ordered with root first: {self.parents}")
        for name in ("skinning_weights", "joint_regressor"):
            if tuple(getattr(self, name).shape) != (self.n_joints, n):
                raise ModelInvariantError(f"{name} must be ({self.n_joints}, {n})")
        check_skinning_weights(self.skinning_weights)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ModelInvariantError("triangles must be (m, 3)")
        if self.n_triangles and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise ModelInvariantError("triangle index out of range")
        if tuple(self.uv.shape) != (n, 2):
            raise ModelInvariantError("uv must be (n, 2)")
        if torch.any(self.uv < 0) or torch.any(self.uv > 1):
            raise ModelInvariantError("uv coordinates must lie in [0, 1]")
        self._validate_landmarks()

    def _validate_landmarks(self) -> None:
        faces, bary = self.landmark_faces, self.landmark_barycentric
        if faces.shape[0] != LANDMARK_COUNT or tuple(bary.shape) != (LANDMARK_COUNT, 3):
            raise ModelInvariantError(f"landmark embedding must hold {LANDMARK_COUNT} entries")
        if faces.min() < 0 or faces.max() >= self.n_triangles:
            raise ModelInvariantError("landmark triangle index out of range")
        if torch.any(bary < -BARYCENTRIC_TOL) or torch.any((bary.sum(-1) - 1).abs() > BARYCENTRIC_TOL):
            raise ModelInvariantError("landmark barycentric triples must be nonnegative and sum to 1")
        for upper, lower in self.eyelid_pairs:
            if not (0 <= upper < LANDMARK_COUNT and 0 <= lower < LANDMARK_COUNT):
                raise ModelInvariantError(f"eyelid pair ({upper}, {lower}) out of range")


def check_skinning_weights(weights: Tensor, tol: float = WEIGHT_SUM_TOL) -> None:
    """Every column (vertex) must hold nonnegative weights summing to one"""
    w = weights.detach()
    if torch.any(w < 0):
        raise SkinningWeightsError("skinning weights must be nonnegative")
    worst = float((w.sum(dim=0) - 1.0).abs().max()) if w.numel() else 0.0
    if worst > tol:
        raise SkinningWeightsError(f"skinning weight columns must sum to 1 (worst deviation {worst:.3g})")
