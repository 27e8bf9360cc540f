"""
Synthetic ground truth: random codes, rendered samples and the separable
detail fixture used to check detail disentanglement.
"""

import logging

import numpy as np
import torch
from torch import Tensor

from ..appearance.sh import SH_C0
from ..common.tensors import DTYPE
from ..model_core.toy import HEAD_RADII
from .code import DETAIL_DIM, LatentCode
from .renderer import FaceRenderer
from .subjects import SubjectImage, SubjectSet

logger = logging.getLogger(__name__)

# fraction of the image height covered by the head
HEAD_FILL = 0.62


def _generator(seed: int | torch.Generator) -> torch.Generator:
    if isinstance(seed, torch.Generator):
        return seed
    return torch.Generator().manual_seed(int(seed))


def default_scale(image_height: int) -> float:
    return HEAD_FILL * image_height / (2.0 * float(HEAD_RADII[1]))


def random_code(
    renderer: FaceRenderer,
    seed: int | torch.Generator = 0,
    shape_std: float = 1.0,
    expression_std: float = 1.0,
    pose_std: float = 0.08,
    albedo_std: float = 1.0,
    light_std: float = 0.15,
    camera_jitter: float = 0.03,
    detail_std: float = 1.0,
) -> LatentCode:
    """Random code that keeps the head inside the frame; only global and jaw rotate"""
    g = _generator(seed)
    model = renderer.model
    height, width = renderer.image_size

    def normal(*size: int) -> Tensor:
        return torch.randn(*size, generator=g, dtype=DTYPE)

    pose = torch.zeros(model.n_pose, dtype=DTYPE)
    pose[0:3] = pose_std * normal(3)
    if "jaw" in model.joint_names:
        jaw = model.jaw_slice
        pose[jaw] = pose_std * normal(3)
        pose[jaw.start] = abs(float(pose[jaw.start]))
    light = torch.zeros(9, 3, dtype=DTYPE)
    light[0] = 0.9 / SH_C0 + 0.1 * light_std * normal(3)
    light[1:4] = light_std * normal(3)[:, None] + 0.1 * light_std * normal(3, 3)
    scale = default_scale(height) * (1.0 + camera_jitter * float(normal(1)))
    translation = torch.tensor([width / 2.0, height / 2.0], dtype=DTYPE) + 2.0 * normal(2)
    return LatentCode(
        shape=shape_std * normal(model.n_shape),
        pose=pose,
        expression=expression_std * normal(model.n_expression),
        albedo=albedo_std * normal(renderer.albedo_model.n_albedo),
        light=light.reshape(-1),
        scale=torch.tensor(scale, dtype=DTYPE),
        translation=translation,
        detail=detail_std * normal(DETAIL_DIM),
        jaw=model.jaw_index if "jaw" in model.joint_names else 0,
    )


def perturb_code(code: LatentCode, seed: int | torch.Generator = 1, amount: float = 0.3) -> LatentCode:
    """Noisy copy for fitting from a perturbed start"""
    g = _generator(seed)

    def noisy(t: Tensor, std: float) -> Tensor:
        return t + std * torch.randn(t.shape, generator=g, dtype=t.dtype)

    return code.replace(
        shape=noisy(code.shape, amount),
        expression=noisy(code.expression, amount),
        pose=code.pose + (code.pose != 0) * amount * 0.1 * torch.randn(code.pose.shape, generator=g, dtype=DTYPE),
        albedo=noisy(code.albedo, amount),
        translation=noisy(code.translation, 3.0 * amount),
        scale=code.scale * (1.0 + 0.05 * amount),
    )


@torch.no_grad()
def synthesize_sample(
    renderer: FaceRenderer, code: LatentCode, displacement: Tensor | None = None, name: str = ""
) -> SubjectImage:
    """Render a code (optionally with a displacement map); skin mask = rendered coverage"""
    if displacement is None:
        result = renderer.render(code)
    else:
        result = renderer.render_detail(code, displacement)
    return SubjectImage(
        image=result.image.clone(),
        landmarks=result.landmarks_2d.clone(),
        mask=result.coverage,
        code=code.clone(),
        displacement=None if displacement is None else displacement.detach().clone(),
        name=name,
    )


def _cosine_field(size: int, rng: np.random.Generator, max_frequency: int = 4) -> np.ndarray:
    centres = (np.arange(size) + 0.5) / size
    v, u = np.meshgrid(centres, centres, indexing="ij")
    fu, fv = rng.integers(1, max_frequency + 1, size=2)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    return np.cos(2 * np.pi * fu * u + phase[0]) * np.cos(2 * np.pi * fv * v + phase[1])


def separable_detail_fixture(
    renderer: FaceRenderer,
    n_subjects: int = 2,
    n_expressions: int = 3,
    seed: int = 0,
    subject_amplitude: float = 0.004,
    expression_amplitude: float = 0.002,
    expression_fields: int = 4,
) -> list[SubjectSet]:
    """
    Subjects whose ground-truth displacement is f(subject) + g(expression).

    - f is a random cosine pattern per subject
    - g is linear in the first `expression_fields` entries of psi
    - every subject shares the same set of expression codes and jaw poses
    """
    rng = np.random.default_rng(seed)
    g = torch.Generator().manual_seed(seed)
    size = renderer.uv_size
    n_fields = min(expression_fields, renderer.model.n_expression)
    fields = torch.from_numpy(np.stack([_cosine_field(size, rng) for _ in range(n_fields)]))
    expression_codes = [random_code(renderer, g) for _ in range(n_expressions)]

    subjects = []
    for s in range(n_subjects):
        identity = random_code(renderer, g)
        subject_field = torch.from_numpy(subject_amplitude * _cosine_field(size, rng))
        images = []
        for e, expression in enumerate(expression_codes):
            pose = identity.pose.clone()
            pose[identity.jaw_slice] = expression.jaw_pose
            code = identity.replace(expression=expression.expression, pose=pose, detail=torch.zeros_like(identity.detail))
            weights = torch.clamp(expression.expression[:n_fields], -2.0, 2.0) / 2.0
            expression_field = expression_amplitude * torch.einsum("k,kij->ij", weights, fields)
            displacement = torch.clamp(subject_field + expression_field, -0.0099, 0.0099)
            images.append(synthesize_sample(renderer, code, displacement, name=f"subject{s}_expr{e}"))
        subjects.append(SubjectSet(f"subject{s}", tuple(images)))
    logger.debug("separable fixture: %d subjects x %d expressions", n_subjects, n_expressions)
    return subjects
