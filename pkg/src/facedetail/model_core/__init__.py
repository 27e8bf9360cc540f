from .geometry import (
    blend_skinning,
    decode_geometry,
    face_normals,
    joint_locations,
    pose_correctives,
    pose_features,
    shaped_vertices,
    surface_landmarks,
    vertex_normals,
)
from .head_model import LANDMARK_COUNT, LandmarkEmbedding, ParametricHeadModel, check_skinning_weights
from .mesh import Mesh
from .rotation import axis_angle_to_matrix, skew
from .toy import icosphere, landmark_layout, synthesize_toy_model

__all__ = [
    "LANDMARK_COUNT",
    "LandmarkEmbedding",
    "Mesh",
    "ParametricHeadModel",
    "axis_angle_to_matrix",
    "blend_skinning",
    "check_skinning_weights",
    "decode_geometry",
    "face_normals",
    "icosphere",
    "joint_locations",
    "landmark_layout",
    "pose_correctives",
    "pose_features",
    "shaped_vertices",
    "skew",
    "surface_landmarks",
    "synthesize_toy_model",
    "vertex_normals",
]
