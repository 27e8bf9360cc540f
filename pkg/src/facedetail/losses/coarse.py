import torch
from torch import Tensor

from ..common.errors import ShapeMismatchError, ZeroEmbeddingError
from .extractor import FeatureExtractor

EMBEDDING_EPS = 1e-12


def landmark_loss(target: Tensor, projected: Tensor, weights: Tensor | None = None) -> Tensor:
    """Weighted sum of per-landmark L1 distances"""
    if target.shape != projected.shape:
        raise ShapeMismatchError(f"landmark shapes differ: {tuple(target.shape)} vs {tuple(projected.shape)}")
    per_point = (target.to(projected.dtype) - projected).abs().sum(dim=-1)
    if weights is not None:
        per_point = weights.to(per_point.dtype) * per_point
    return per_point.sum()


def eye_closure_loss(target: Tensor, landmarks_3d: Tensor, eyelid_pairs, scale) -> Tensor:
    """Sum over eyelid pairs of |(k_i - k_j) - s * (M_i - M_j)_xy|_1"""
    if not eyelid_pairs:
        return landmarks_3d.new_zeros(())
    upper = torch.tensor([p[0] for p in eyelid_pairs])
    lower = torch.tensor([p[1] for p in eyelid_pairs])
    target = target.to(landmarks_3d.dtype)
    observed = target[upper] - target[lower]
    predicted = scale * (landmarks_3d[upper, :2] - landmarks_3d[lower, :2])
    return (observed - predicted).abs().sum()


def _broadcast_mask(mask: Tensor, image: Tensor) -> Tensor:
    mask = mask.to(image.dtype)
    if mask.ndim == image.ndim - 1:
        mask = mask[..., None]
    return mask


def photometric_loss(image: Tensor, rendered: Tensor, mask: Tensor) -> Tensor:
    """Sum of absolute masked differences"""
    if image.shape != rendered.shape:
        raise ShapeMismatchError(f"image sizes differ: {tuple(image.shape)} vs {tuple(rendered.shape)}")
    if tuple(mask.shape[:2]) != tuple(image.shape[:2]):
        raise ShapeMismatchError("mask must match the image resolution")
    return (_broadcast_mask(mask, rendered) * (image.to(rendered.dtype) - rendered)).abs().sum()


def mask_area(mask: Tensor, channels: int = 3) -> float:
    """Number of masked values, used to normalize summed photometric terms for logs"""
    return float(mask.detach().to(torch.float64).sum()) * channels


def cosine_identity_loss(a: Tensor, b: Tensor) -> Tensor:
    norm_a, norm_b = torch.linalg.norm(a), torch.linalg.norm(b)
    if float(norm_a.detach()) <= EMBEDDING_EPS or float(norm_b.detach()) <= EMBEDDING_EPS:
        raise ZeroEmbeddingError("identity embedding has zero length")
    # 1 - cos(a, b) written as half the squared chord between the unit vectors
    diff = a / norm_a - b / norm_b
    return 0.5 * (diff * diff).sum()


def identity_loss(extractor: FeatureExtractor, image: Tensor, rendered: Tensor) -> Tensor:
    """1 - cos between the identity embeddings of the two images"""
    return cosine_identity_loss(extractor.embedding(image.to(rendered.dtype)), extractor.embedding(rendered))


def coarse_regularizers(shape: Tensor, expression: Tensor, albedo: Tensor) -> dict[str, Tensor]:
    return {
        "shape_reg": (shape * shape).sum(),
        "expression_reg": (expression * expression).sum(),
        "albedo_reg": (albedo * albedo).sum(),
    }
