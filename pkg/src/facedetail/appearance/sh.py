"""
Second-order real spherical harmonics and Lambertian shading in UV space.

Basis order: 1, y, z, x, xy, yz, 3z^2 - 1, xz, x^2 - y^2 with the constants below.
Lighting is 9 coefficients per colour channel.
"""

from dataclasses import dataclass

import torch
from torch import Tensor

from ..common.errors import DimensionError
from ..common.tensors import as_float
from .uv import MapTag, UVImage, check_unit

SH_C0 = 0.282095
SH_C1 = 0.488603
SH_C2 = 1.092548
SH_C3 = 0.315392
SH_C4 = 0.546274


@dataclass(frozen=True, eq=False)
class Lighting:
    coefficients: Tensor  # (9, 3)

    def __post_init__(self) -> None:
        coefficients = as_float(self.coefficients).reshape(9, 3)
        if not bool(torch.isfinite(coefficients.detach()).all()):
            raise DimensionError("lighting coefficients must be finite")
        object.__setattr__(self, "coefficients", coefficients)

    @classmethod
    def ambient(cls, level: float = 1.0) -> "Lighting":
        """Band-0 light that shades a unit albedo to `level`"""
        coefficients = torch.zeros(9, 3, dtype=torch.float64)
        coefficients[0] = level / SH_C0
        return cls(coefficients)


def sh_basis(normals: Tensor, validate: bool = True) -> Tensor:
    """(..., 3) unit normals -> (..., 9) basis values"""
    if normals.shape[-1] != 3:
        raise DimensionError("normals must have 3 components")
    if validate:
        check_unit(normals)
    x, y, z = normals[..., 0], normals[..., 1], normals[..., 2]
    return torch.stack(
        [
            torch.full_like(x, SH_C0),
            SH_C1 * y,
            SH_C1 * z,
            SH_C1 * x,
            SH_C2 * x * y,
            SH_C2 * y * z,
            SH_C3 * (3.0 * z * z - 1.0),
            SH_C2 * x * z,
            SH_C4 * (x * x - y * y),
        ],
        dim=-1,
    )


def shade(albedo: UVImage | Tensor, light: Lighting | Tensor, normals: UVImage | Tensor, mask: Tensor) -> UVImage:
    """B = A * sum_k l_k H_k(N) inside the mask, zero outside"""
    a = albedo.data if isinstance(albedo, UVImage) else albedo
    n = normals.data if isinstance(normals, UVImage) else normals
    coefficients = light.coefficients if isinstance(light, Lighting) else as_float(light).reshape(9, 3)
    if a.shape[:2] != n.shape[:2] or tuple(mask.shape) != tuple(a.shape[:2]):
        raise DimensionError("albedo, normals and mask must share the UV resolution")
    inside = mask.bool()
    check_unit(n, inside)
    irradiance = sh_basis(n, validate=False) @ coefficients  # (d, d, 3)
    shaded = torch.where(inside[..., None], a * irradiance, torch.zeros_like(irradiance))
    return UVImage(data=shaded, tag=MapTag.SHADED, mask=inside)
