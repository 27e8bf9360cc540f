"""
Feature extractors behind the identity and ID-MRF losses.

- FeatureExtractor is the pluggable interface: an identity embedding (unit vector)
  and multi-scale patch features, each scale carrying its loss weight.
- GradientHistogramExtractor is the deterministic built-in: gradient-orientation
  histograms of the grayscale image pooled over 8x8 cells at two scales. It holds
  no mutable state, and one shared instance serves every caller.
"""

from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor

from ..common.errors import DimensionError
from ..common.singleton import ThreadSafeSingletonMeta

LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    features: Tensor  # (C, h, w)
    mask: Tensor  # (h, w) bool, cells inside the face region
    weight: float


class FeatureExtractor(metaclass=ABCMeta):
    @abstractmethod
    def embedding(self, image: Tensor) -> Tensor:
        """(H, W, 3) image -> unit vector"""

    @abstractmethod
    def patch_features(self, image: Tensor, mask: Tensor | None = None) -> list[FeatureGrid]:
        """(H, W, 3) image -> feature grids, finest first"""


class _SingletonABCMeta(ThreadSafeSingletonMeta, ABCMeta):
    pass


class GradientHistogramExtractor(FeatureExtractor, metaclass=_SingletonABCMeta):
    n_bins = 8
    cell = 8
    # coarse scale counts twice as much as the fine one
    scale_weights = (1.0, 2.0)
    embedding_floor = 1e-3

    def _check(self, image: Tensor) -> None:
        if image.ndim != 3 or image.shape[-1] != 3:
            raise DimensionError(f"images must be (H, W, 3), got {tuple(image.shape)}")
        min_side = self.cell * 2 ** (len(self.scale_weights) - 1)
        if min(image.shape[0], image.shape[1]) < min_side:
            raise DimensionError(f"images must be at least {min_side} pixels on each side")

    def _orientation_responses(self, gray: Tensor) -> Tensor:
        """(1, 1, H, W) -> (1, n_bins, H, W) magnitude-weighted doubled-angle responses"""
        padded = F.pad(gray, (1, 1, 1, 1), mode="replicate")
        gx = 0.5 * (padded[..., 1:-1, 2:] - padded[..., 1:-1, :-2])
        gy = 0.5 * (padded[..., 2:, 1:-1] - padded[..., :-2, 1:-1])
        magnitude_sq = gx * gx + gy * gy + 1e-12
        magnitude = torch.sqrt(magnitude_sq)
        cos2 = (gx * gx - gy * gy) / magnitude_sq
        sin2 = 2.0 * gx * gy / magnitude_sq
        angles = torch.arange(self.n_bins, dtype=gray.dtype) * (2.0 * torch.pi / self.n_bins)
        response = cos2 * torch.cos(angles)[None, :, None, None] + sin2 * torch.sin(angles)[None, :, None, None]
        return magnitude * torch.relu(response)

    def _scales(self, image: Tensor) -> list[Tensor]:
        gray = (image * torch.tensor(LUMA, dtype=image.dtype)).sum(dim=-1)[None, None]
        grids = []
        for level in range(len(self.scale_weights)):
            if level:
                gray = F.avg_pool2d(gray, 2)
            grids.append(F.avg_pool2d(self._orientation_responses(gray), self.cell))
        return grids

    def patch_features(self, image: Tensor, mask: Tensor | None = None) -> list[FeatureGrid]:
        self._check(image)
        out = []
        for level, (grid, weight) in enumerate(zip(self._scales(image), self.scale_weights)):
            h, w = grid.shape[-2:]
            if mask is None:
                cell_mask = torch.ones(h, w, dtype=torch.bool)
            else:
                pooled = F.avg_pool2d(mask.to(image.dtype)[None, None], self.cell * 2**level)
                cell_mask = pooled[0, 0, :h, :w] >= 0.5
            out.append(FeatureGrid(features=grid[0], mask=cell_mask, weight=weight))
        return out

    def embedding(self, image: Tensor) -> Tensor:
        self._check(image)
        pooled = torch.cat([grid.mean(dim=(-2, -1)).reshape(-1) for grid in self._scales(image)])
        pooled = pooled + self.embedding_floor
        return pooled / torch.linalg.norm(pooled)


def builtin_extractor() -> GradientHistogramExtractor:
    return GradientHistogramExtractor()
