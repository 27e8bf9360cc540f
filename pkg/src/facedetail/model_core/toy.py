"""
Synthetic toy head model.

- An icosphere cap (open at the back) scaled to head proportions with a nose bump.
- Smooth random blendshapes built from low-degree polynomials of the unit-sphere position.
- FLAME-ordered joints (root, neck, jaw, left_eye, right_eye), trimmed or extended to k.
- An azimuthal UV unwrap around the face direction (+z) that is mirror symmetric in u.
- A 68-point landmark layout embedded through the UV parameterization.

Every float is rounded to float32 before it is stored, so saving the model to the
asset container and loading it back is bit-identical.
"""

import itertools
import logging
from functools import lru_cache

import numpy as np
import torch

from .head_model import LANDMARK_COUNT, ParametricHeadModel

logger = logging.getLogger(__name__)

HEAD_RADII = np.array([0.08, 0.10, 0.09])
CAP_ANGLE = 2.2
UV_RADIUS = 0.5 * 0.95
FLAME_JOINTS = ("root", "neck", "jaw", "left_eye", "right_eye")
FLAME_PARENTS = (-1, 0, 1, 1, 1)
EYELID_PAIRS = ((37, 41), (38, 40), (43, 47), (44, 46))

# =============================================================================
# ICOSPHERE
# =============================================================================

_GOLDEN = (1.0 + 5.0**0.5) / 2.0
_ICOSAHEDRON_VERTICES = [
    (-1, _GOLDEN, 0), (1, _GOLDEN, 0), (-1, -_GOLDEN, 0), (1, -_GOLDEN, 0),
    (0, -1, _GOLDEN), (0, 1, _GOLDEN), (0, -1, -_GOLDEN), (0, 1, -_GOLDEN),
    (_GOLDEN, 0, -1), (_GOLDEN, 0, 1), (-_GOLDEN, 0, -1), (-_GOLDEN, 0, 1),
]  # fmt: skip
_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]  # fmt: skip


@lru_cache(maxsize=8)
def _icosphere(n_subdiv: int) -> tuple[np.ndarray, np.ndarray]:
    vertices = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in _ICOSAHEDRON_VERTICES]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(n_subdiv):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    return np.stack(vertices), np.array(faces, dtype=np.int64)


def icosphere(n_subdiv: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere with outward counter-clockwise faces"""
    if n_subdiv < 0:
        raise ValueError("n_subdiv must be >= 0")
    vertices, faces = _icosphere(n_subdiv)
    return vertices.copy(), faces.copy()


# =============================================================================
# UV AND LANDMARKS
# =============================================================================


def azimuthal_uv(directions: np.ndarray, cap_angle: float = CAP_ANGLE) -> np.ndarray:
    """Unit directions to UV: polar angle from +z sets the radius, azimuth the angle"""
    polar = np.arccos(np.clip(directions[:, 2], -1.0, 1.0))
    azimuth = np.arctan2(directions[:, 1], directions[:, 0])
    radius = UV_RADIUS * polar / cap_angle
    return 0.5 + radius[:, None] * np.stack([np.cos(azimuth), np.sin(azimuth)], axis=1)


def landmark_layout() -> np.ndarray:
    """68 points in a face frame (x right, y down, roughly unit radius)"""
    points = []
    for i in range(17):  # jaw
        t = np.pi * (1.0 - i / 16.0)
        points.append((0.8 * np.cos(t), 0.05 + 0.8 * np.sin(t)))
    for side in (-1.0, 1.0):  # brows
        xs = np.linspace(0.6, 0.15, 5) if side < 0 else np.linspace(0.15, 0.6, 5)
        for x in xs:
            points.append((side * x, -0.45 - 0.08 * np.sin(np.pi * (x - 0.15) / 0.45)))
    for y in (-0.3, -0.2, -0.1, 0.0):  # nose bridge
        points.append((0.0, y))
    for x in np.linspace(-0.16, 0.16, 5):  # nostrils
        points.append((x, 0.1))
    a, b = 0.12, 0.05
    for cx in (-0.35, 0.35):  # eyes, corner first then upper lid then lower lid
        cy = -0.25
        points += [
            (cx - a, cy), (cx - a / 3, cy - b), (cx + a / 3, cy - b),
            (cx + a, cy), (cx + a / 3, cy + b), (cx - a / 3, cy + b),
        ]  # fmt: skip
    for k in range(12):  # outer lips
        t = np.pi + 2.0 * np.pi * k / 12
        points.append((0.25 * np.cos(t), 0.4 + 0.1 * np.sin(t)))
    for k in range(8):  # inner lips
        t = np.pi + 2.0 * np.pi * k / 8
        points.append((0.15 * np.cos(t), 0.4 + 0.04 * np.sin(t)))
    layout = np.array(points, dtype=np.float64)
    assert layout.shape == (LANDMARK_COUNT, 2)
    return layout


def _layout_to_uv(layout: np.ndarray, cap_angle: float) -> np.ndarray:
    polar = 1.1 * np.linalg.norm(layout, axis=1)
    azimuth = np.arctan2(layout[:, 1], layout[:, 0])
    radius = UV_RADIUS * polar / cap_angle
    return 0.5 + radius[:, None] * np.stack([np.cos(azimuth), np.sin(azimuth)], axis=1)


def embed_uv_points(points: np.ndarray, uv: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Triangle and barycentric triple of each UV point (most interior containing triangle)"""
    a, b, c = uv[faces[:, 0]], uv[faces[:, 1]], uv[faces[:, 2]]
    e1, e2 = b - a, c - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    rel = points[:, None, :] - a[None]
    w1 = (rel[..., 0] * e2[None, :, 1] - rel[..., 1] * e2[None, :, 0]) / det
    w2 = (e1[None, :, 0] * rel[..., 1] - e1[None, :, 1] * rel[..., 0]) / det
    bary = np.stack([1.0 - w1 - w2, w1, w2], axis=-1)
    best = bary.min(axis=-1).argmax(axis=1)
    chosen = np.clip(bary[np.arange(len(points)), best], 0.0, None)
    return best, chosen / chosen.sum(axis=1, keepdims=True)


# =============================================================================
# BLENDSHAPES AND RIG
# =============================================================================

_MONOMIALS = [e for e in itertools.product(range(4), repeat=3) if sum(e) <= 3]


def _polynomial_features(directions: np.ndarray) -> np.ndarray:
    return np.stack([np.prod(directions**np.array(e), axis=1) for e in _MONOMIALS], axis=1)


def _smooth_basis(features: np.ndarray, count: int, sigmas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    coefficients = rng.standard_normal((count, features.shape[1], 3)) / np.sqrt(features.shape[1])
    basis = np.einsum("nf,kfc->nck", features, coefficients)
    return basis * sigmas[None, None, :]


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _joint_setup(k: int, rng: np.random.Generator) -> tuple[tuple[str, ...], tuple[int, ...], list]:
    anchors = {
        "neck": [(0.7, 0.7, -0.2), (-0.7, 0.7, -0.2)],
        "jaw": [(0.95, 0.2, -0.2), (-0.95, 0.2, -0.2)],
        "left_eye": [(0.35, -0.25, 0.9)],
        "right_eye": [(-0.35, -0.25, 0.9)],
    }
    names = list(FLAME_JOINTS[: k + 1])
    parents = list(FLAME_PARENTS[: k + 1])
    joint_anchors: list = [None] + [anchors[name] for name in names[1:]]
    for extra in range(len(names), k + 1):
        names.append(f"joint_{extra}")
        parents.append(1 if extra > 1 else 0)
        direction = rng.standard_normal(3)
        direction[2] = abs(direction[2])
        joint_anchors.append([tuple(direction)])
    return tuple(names), tuple(parents), joint_anchors


def _regressor(directions: np.ndarray, joint_anchors: list) -> np.ndarray:
    n = directions.shape[0]
    rows = []
    for anchors in joint_anchors:
        if anchors is None:
            rows.append(np.full(n, 1.0 / n))
            continue
        row = np.zeros(n)
        for anchor in anchors:
            target = np.asarray(anchor, dtype=np.float64)
            target = target / np.linalg.norm(target)
            dist = np.linalg.norm(directions - target, axis=1)
            nearest = np.argsort(dist, kind="stable")[:8]
            inv = 1.0 / (dist[nearest] + 1e-3)
            row[nearest] += inv / inv.sum() / len(anchors)
        rows.append(row)
    return np.stack(rows)


def _skinning(directions: np.ndarray, names: tuple[str, ...], joint_anchors: list) -> np.ndarray:
    x, y, z = directions.T
    front = _smoothstep((z + 0.1) / 0.5)
    raw = []
    for name, anchors in zip(names, joint_anchors):
        if name == "root":
            raw.append(np.ones_like(x))
        elif name == "neck":
            raw.append(0.5 * _smoothstep((y - 0.2) / 0.6))
        elif name == "jaw":
            raw.append(5.0 * _smoothstep((y - 0.1) / 0.4) * front)
        else:
            target = np.asarray(anchors[0], dtype=np.float64)
            target = target / np.linalg.norm(target)
            width = 0.08 if name.endswith("_eye") else 0.3
            scale = 2.0 if name.endswith("_eye") else 0.5
            raw.append(scale * np.exp(-np.sum((directions - target) ** 2, axis=1) / (2 * width**2)))
    weights = np.stack(raw)
    return weights / weights.sum(axis=0, keepdims=True)


def _f32(array: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(array, dtype=np.float32)).to(torch.float64)


def synthesize_toy_model(
    seed: int = 0,
    n_subdiv: int = 3,
    n_shape: int = 100,
    n_expression: int = 50,
    n_joints: int = 4,
) -> ParametricHeadModel:
    """Deterministic toy head; n_joints counts the articulated joints (root excluded)"""
    if n_joints < 0:
        raise ValueError("n_joints must be >= 0")
    rng = np.random.default_rng(seed)
    sphere, faces = icosphere(n_subdiv)
    polar = np.arccos(np.clip(sphere[:, 2], -1.0, 1.0))
    keep = polar <= CAP_ANGLE
    faces = faces[np.all(keep[faces], axis=1)]
    used = np.unique(faces)
    remap = np.full(sphere.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    directions = sphere[used]
    faces = remap[faces]

    template = directions * HEAD_RADII
    nose = np.exp(-(directions[:, 0] ** 2 + directions[:, 1] ** 2) / (2 * 0.15**2)) * np.clip(directions[:, 2], 0, None)
    template[:, 2] += 0.02 * nose

    features = _polynomial_features(directions)
    shape_sigma = 0.004 / np.sqrt(1.0 + np.arange(n_shape))
    shape_basis = _smooth_basis(features, n_shape, shape_sigma, rng)
    front = _smoothstep((directions[:, 2] + 0.2) / 1.2) ** 2
    expression_sigma = np.full(n_expression, 0.003)
    expression_basis = _smooth_basis(features, n_expression, expression_sigma, rng) * front[:, None, None]
    pose_basis = _smooth_basis(features, 9 * n_joints, np.full(9 * n_joints, 5e-4), rng)

    names, parents, joint_anchors = _joint_setup(n_joints, rng)
    regressor = _regressor(directions, joint_anchors)
    weights = _skinning(directions, names, joint_anchors)

    uv = azimuthal_uv(directions)
    lmk_faces, lmk_bary = embed_uv_points(_layout_to_uv(landmark_layout(), CAP_ANGLE), uv, faces)

    logger.debug(
        "toy model seed=%d: %d vertices, %d triangles, %d joints", seed, len(used), len(faces), len(names)
    )
    return ParametricHeadModel(
        template=_f32(template),
        triangles=torch.from_numpy(faces.astype(np.int64)),
        shape_basis=_f32(shape_basis),
        expression_basis=_f32(expression_basis),
        pose_basis=_f32(pose_basis),
        skinning_weights=_f32(weights),
        joint_regressor=_f32(regressor),
        parents=parents,
        joint_names=names,
        landmark_faces=torch.from_numpy(lmk_faces.astype(np.int64)),
        landmark_barycentric=_f32(lmk_bary),
        uv=_f32(np.clip(uv, 0.0, 1.0)),
        eyelid_pairs=EYELID_PAIRS,
    )
