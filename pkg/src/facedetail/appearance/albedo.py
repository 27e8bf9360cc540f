from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor

from ..common.errors import DimensionError
from ..common.mixins import TensorFieldsMixin
from ..common.tensors import as_float
from .uv import MapTag, UVImage

SKIN_TONE = (0.75, 0.55, 0.45)


@dataclass(frozen=True, eq=False)
class AlbedoModel(TensorFieldsMixin):
    """Linear UV albedo: mean (d, d, 3) plus basis (d, d, 3, |alpha|)"""

    mean: Tensor
    basis: Tensor

    def __post_init__(self) -> None:
        if self.mean.ndim != 3 or self.mean.shape[2] != 3 or self.mean.shape[0] != self.mean.shape[1]:
            raise DimensionError(f"albedo mean must be (d, d, 3), got {tuple(self.mean.shape)}")
        if self.basis.ndim != 4 or tuple(self.basis.shape[:3]) != tuple(self.mean.shape):
            raise DimensionError("albedo basis must be (d, d, 3, K) with the mean's resolution")

    @property
    def size(self) -> int:
        return int(self.mean.shape[0])

    @property
    def n_albedo(self) -> int:
        return int(self.basis.shape[-1])


def albedo_map(model: AlbedoModel, alpha) -> UVImage:
    """Mean plus the weighted basis; values are left unclamped"""
    alpha = as_float(alpha, model.mean.dtype)
    if alpha.ndim != 1 or alpha.shape[0] != model.n_albedo:
        raise DimensionError(f"alpha must have {model.n_albedo} entries, got {tuple(alpha.shape)}")
    data = model.mean + torch.einsum("ijck,k->ijc", model.basis, alpha)
    return UVImage(data=data, tag=MapTag.ALBEDO)


def synthesize_toy_albedo(seed: int = 0, size: int = 256, n_albedo: int = 50) -> AlbedoModel:
    """Skin-toned mean with low-frequency cosine variations; float32-exact values"""
    rng = np.random.default_rng(seed + 7919)
    centres = (np.arange(size) + 0.5) / size
    v, u = np.meshgrid(centres, centres, indexing="ij")

    def field(fu: int, fv: int, phase: float) -> np.ndarray:
        return np.cos(np.pi * (fu * u + fv * v) + phase)

    mean = np.empty((size, size, 3))
    for c, tone in enumerate(SKIN_TONE):
        mean[..., c] = tone + 0.03 * field(1, 1, rng.uniform(0, 2 * np.pi))
    basis = np.empty((size, size, 3, n_albedo))
    for k in range(n_albedo):
        fu, fv = rng.integers(0, 4, size=2)
        colour = rng.standard_normal(3)
        pattern = field(int(fu), int(fv), rng.uniform(0, 2 * np.pi))
        basis[..., k] = (0.05 / np.sqrt(1.0 + k)) * pattern[..., None] * colour
    return AlbedoModel(
        mean=torch.from_numpy(mean.astype(np.float32)).to(torch.float64),
        basis=torch.from_numpy(basis.astype(np.float32)).to(torch.float64),
    )
