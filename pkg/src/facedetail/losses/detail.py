"""
Detail losses: ID-MRF patch matching, UV symmetry and the displacement regularizer.

ID-MRF follows the relative-similarity formulation: features are centred on the
target mean and L2 normalized, cosine distances are divided by each generated
patch's best match, sharpened with exp((1 - r) / h), normalized over target
patches, and the loss is -log of the mean best contextual similarity per target
patch. Scales are combined with the extractor's per-scale weights.
"""

import logging

import torch
from torch import Tensor

from ..common.errors import ShapeMismatchError
from .extractor import FeatureExtractor

logger = logging.getLogger(__name__)

MRF_BANDWIDTH = 0.5
MRF_EPS = 1e-5
NORM_EPS = 1e-12


def mrf_similarity_loss(generated: Tensor, target: Tensor, bandwidth: float = MRF_BANDWIDTH, eps: float = MRF_EPS) -> Tensor:
    """
    generated (C, N) and target (C, M) patch features -> scalar loss

    - 0 when every target patch has an exclusive exact match
    """
    mean = target.mean(dim=1, keepdim=True)
    gen = generated - mean
    tar = target - mean
    gen = gen / torch.linalg.norm(gen, dim=0, keepdim=True).clamp_min(NORM_EPS)
    tar = tar / torch.linalg.norm(tar, dim=0, keepdim=True).clamp_min(NORM_EPS)
    distance = (1.0 - tar.transpose(0, 1) @ gen) / 2.0  # (M, N)
    relative = distance / (distance.min(dim=0, keepdim=True).values + eps)
    weight = torch.exp((1.0 - relative) / bandwidth)
    contextual = weight / weight.sum(dim=0, keepdim=True)
    best = contextual.max(dim=1).values
    return -torch.log(best.mean())


def idmrf_loss(
    extractor: FeatureExtractor,
    image: Tensor,
    rendered: Tensor,
    mask: Tensor | None = None,
    bandwidth: float = MRF_BANDWIDTH,
    eps: float = MRF_EPS,
) -> Tensor:
    """Weighted multi-scale ID-MRF between the rendered detail image and the target"""
    if image.shape != rendered.shape:
        raise ShapeMismatchError("ID-MRF images must share their size")
    targets = extractor.patch_features(image.to(rendered.dtype), mask)
    generated = extractor.patch_features(rendered, mask)
    total = rendered.new_zeros(())
    used = 0
    for tgt, gen in zip(targets, generated):
        cells = tgt.mask.reshape(-1)
        if not bool(cells.any()):
            continue
        used += 1
        t = tgt.features.reshape(tgt.features.shape[0], -1)[:, cells]
        g = gen.features.reshape(gen.features.shape[0], -1)[:, cells]
        total = total + tgt.weight * mrf_similarity_loss(g, t, bandwidth, eps)
    if not used:
        logger.warning("ID-MRF mask is empty, loss set to 0")
    return total


def flip_horizontal(values: Tensor) -> Tensor:
    return torch.flip(values, dims=[1])


def symmetry_loss(displacement: Tensor, mask: Tensor) -> Tensor:
    """Masked L1 distance between D and its left-right mirror"""
    if displacement.ndim != 2 or displacement.shape[0] != displacement.shape[1]:
        raise ShapeMismatchError("displacement must be a square (d, d) map")
    return (mask.to(displacement.dtype) * (displacement - flip_horizontal(displacement))).abs().sum()


def detail_regularizer(displacement: Tensor) -> Tensor:
    return displacement.abs().sum()
