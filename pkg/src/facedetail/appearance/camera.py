from dataclasses import dataclass

import torch
from torch import Tensor

from ..common.errors import ConfigurationError, DimensionError
from ..common.tensors import as_float


@dataclass(frozen=True, eq=False)
class Camera:
    """Scaled orthographic camera: v = s * (x, y) + t"""

    scale: Tensor  # scalar
    translation: Tensor  # (2,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scale", as_float(self.scale).reshape(()))
        object.__setattr__(self, "translation", as_float(self.translation).reshape(-1))
        if self.translation.shape[0] != 2:
            raise DimensionError("camera translation must have 2 entries")
        if not bool(self.scale.detach() > 0):
            raise ConfigurationError(f"camera scale must be positive, got {float(self.scale)}")

    @classmethod
    def identity(cls) -> "Camera":
        return cls(torch.tensor(1.0, dtype=torch.float64), torch.zeros(2, dtype=torch.float64))

    def detached(self) -> "Camera":
        return Camera(self.scale.detach(), self.translation.detach())


def project(points: Tensor, camera: Camera) -> Tensor:
    """Orthographic projection of (..., 3) points; z never enters the result"""
    return camera.scale * points[..., :2] + camera.translation
