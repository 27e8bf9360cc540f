"""
Geometry of the head model: blendshapes, joint regression, pose correctives,
linear blend skinning, surface landmarks and vertex normals.

Everything here is a pure torch function, differentiable with respect to the
continuous parameters. Dimension problems raise DimensionError up front.
"""

import logging
from collections.abc import Sequence

import torch
from torch import Tensor

from ..common.errors import DegenerateNormalError, DimensionError, EmptyMeshError, LandmarkIndexError
from ..common.tensors import as_float, as_index
from .head_model import LandmarkEmbedding, ParametricHeadModel, check_skinning_weights
from .mesh import Mesh
from .rotation import axis_angle_to_matrix

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


def _check_length(name: str, value: Tensor, expected: int) -> Tensor:
    if value.ndim != 1 or value.shape[0] != expected:
        raise DimensionError(f"{name} must have {expected} entries, got shape {tuple(value.shape)}")
    return value


def _coerce(model: ParametricHeadModel, shape, pose, expression) -> tuple[Tensor, Tensor, Tensor]:
    dtype = model.template.dtype
    shape = torch.zeros(model.n_shape, dtype=dtype) if shape is None else as_float(shape, dtype)
    pose = torch.zeros(model.n_pose, dtype=dtype) if pose is None else as_float(pose, dtype)
    expression = torch.zeros(model.n_expression, dtype=dtype) if expression is None else as_float(expression, dtype)
    _check_length("shape (beta)", shape, model.n_shape)
    _check_length("pose (theta)", pose, model.n_pose)
    _check_length("expression (psi)", expression, model.n_expression)
    return shape, pose, expression


def blendshapes(basis: Tensor, coefficients: Tensor) -> Tensor:
    """(n, 3, K) basis times (K,) coefficients"""
    return torch.einsum("nck,k->nc", basis, coefficients)


def shaped_vertices(model: ParametricHeadModel, shape) -> Tensor:
    shape = _check_length("shape (beta)", as_float(shape, model.template.dtype), model.n_shape)
    return model.template + blendshapes(model.shape_basis, shape)


def joint_locations(model: ParametricHeadModel, shape) -> Tensor:
    """Joint positions (k+1, 3) regressed from the shaped rest-pose vertices"""
    return model.joint_regressor @ shaped_vertices(model, shape)


def pose_features(pose: Tensor) -> Tensor:
    """vec(R - I) over the non-root joints, 9k entries"""
    rotations = axis_angle_to_matrix(pose.reshape(-1, 3)[1:])
    eye = torch.eye(3, dtype=pose.dtype, device=pose.device)
    return (rotations - eye).reshape(-1)


def pose_correctives(model: ParametricHeadModel, pose) -> Tensor:
    pose = _check_length("pose (theta)", as_float(pose, model.template.dtype), model.n_pose)
    return blendshapes(model.pose_basis, pose_features(pose))


def _chain_transforms(joints: Tensor, rotations: Tensor, parents: Sequence[int]) -> tuple[Tensor, Tensor]:
    """World rotations and rest-relative translations of every joint"""
    world_r: list[Tensor] = []
    world_t: list[Tensor] = []
    for i, parent in enumerate(parents):
        if parent < 0:
            world_r.append(rotations[i])
            world_t.append(joints[i])
        else:
            offset = joints[i] - joints[parent]
            world_r.append(world_r[parent] @ rotations[i])
            world_t.append(world_r[parent] @ offset + world_t[parent])
    r = torch.stack(world_r)
    t = torch.stack(world_t) - (r @ joints[..., None])[..., 0]
    return r, t


def blend_skinning(
    vertices: Tensor, joints: Tensor, pose: Tensor, weights: Tensor, parents: Sequence[int]
) -> Tensor:
    """
    Linear blend skinning of rest-pose vertices (n, 3).

    - joints (K, 3), pose (3K,) axis-angle per joint with the root first
    - weights (K, n), every column nonnegative and summing to one
    """
    n_joints = len(parents)
    if tuple(joints.shape) != (n_joints, 3) or tuple(weights.shape) != (n_joints, vertices.shape[0]):
        raise DimensionError("joints and weights must match the kinematic chain")
    _check_length("pose (theta)", pose, 3 * n_joints)
    check_skinning_weights(weights)
    if not pose.requires_grad and not bool(pose.any()):
        return vertices.clone()

    rotations = axis_angle_to_matrix(pose.reshape(n_joints, 3))
    world_r, world_t = _chain_transforms(joints, rotations, parents)
    blended_r = torch.einsum("kn,kij->nij", weights, world_r)
    blended_t = weights.transpose(0, 1) @ world_t
    return torch.einsum("nij,nj->ni", blended_r, vertices) + blended_t


def decode_geometry(
    model: ParametricHeadModel,
    shape=None,
    pose=None,
    expression=None,
    *,
    use_pose_correctives: bool = True,
) -> Mesh:
    """Template plus blendshapes, posed by blend skinning; omitted parameters are zero"""
    shape, pose, expression = _coerce(model, shape, pose, expression)
    rest = model.template + blendshapes(model.shape_basis, shape) + blendshapes(model.expression_basis, expression)
    if use_pose_correctives:
        rest = rest + blendshapes(model.pose_basis, pose_features(pose))
    joints = model.joint_regressor @ (model.template + blendshapes(model.shape_basis, shape))
    posed = blend_skinning(rest, joints, pose, model.skinning_weights, model.parents)
    return Mesh(vertices=posed, triangles=model.triangles, uv=model.uv)


def surface_landmarks(mesh: Mesh | Tensor, embedding: LandmarkEmbedding, triangles: Tensor | None = None) -> Tensor:
    """Barycentric interpolation of the embedded triangles, (L, 3)"""
    if isinstance(mesh, Mesh):
        vertices, triangles = mesh.vertices, mesh.triangles
    else:
        vertices = mesh
    faces = as_index(embedding.faces)
    if faces.numel() and (faces.min() < 0 or faces.max() >= triangles.shape[0]):
        raise LandmarkIndexError(f"landmark triangle index out of range [0, {triangles.shape[0]})")
    corners = vertices[triangles[faces]]  # (L, 3, 3)
    bary = embedding.barycentric.to(vertices.dtype)
    return (bary[..., None] * corners).sum(dim=1)


def face_normals(vertices: Tensor, triangles: Tensor) -> Tensor:
    """Unnormalized face normals (length = twice the area); degenerate faces are zero"""
    v0, v1, v2 = (vertices[triangles[:, i]] for i in range(3))
    normals = torch.linalg.cross(v1 - v0, v2 - v0, dim=-1)
    area = 0.5 * torch.linalg.norm(normals.detach(), dim=-1, keepdim=True)
    return torch.where(area < DEGENERATE_AREA, torch.zeros_like(normals), normals)


def vertex_normals(mesh: Mesh) -> Tensor:
    """Area-weighted vertex normals, unit length"""
    if mesh.n_vertices == 0 or mesh.n_triangles == 0:
        raise EmptyMeshError("cannot compute normals of an empty mesh")
    per_face = face_normals(mesh.vertices, mesh.triangles)
    accum = torch.zeros_like(mesh.vertices)
    for i in range(3):
        accum = accum.index_add(0, mesh.triangles[:, i], per_face)
    lengths = torch.linalg.norm(accum, dim=-1, keepdim=True)
    zero = lengths.detach()[:, 0] <= 0
    if bool(zero.any()):
        raise DegenerateNormalError(
            f"{int(zero.sum())} vertices have no incident non-degenerate triangle"
        )
    return accum / lengths
