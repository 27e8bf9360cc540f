import torch
from torch import Tensor

# Below this squared angle the Taylor series is used (keeps gradients finite at 0)
_SMALL_ANGLE_SQ = 1e-8


def skew(v: Tensor) -> Tensor:
    """Cross-product matrices for (..., 3) vectors"""
    zero = torch.zeros_like(v[..., 0])
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    rows = [
        torch.stack([zero, -z, y], dim=-1),
        torch.stack([z, zero, -x], dim=-1),
        torch.stack([-y, x, zero], dim=-1),
    ]
    return torch.stack(rows, dim=-2)


def axis_angle_to_matrix(rotvec: Tensor) -> Tensor:
    """Rodrigues formula for (..., 3) axis-angle vectors, returns (..., 3, 3)"""
    angle_sq = (rotvec * rotvec).sum(dim=-1)[..., None, None]
    small = angle_sq < _SMALL_ANGLE_SQ
    safe_sq = torch.where(small, torch.ones_like(angle_sq), angle_sq)
    angle = torch.sqrt(safe_sq)
    sinc = torch.where(small, 1.0 - angle_sq / 6.0 + angle_sq**2 / 120.0, torch.sin(angle) / angle)
    cosc = torch.where(
        small,
        0.5 - angle_sq / 24.0 + angle_sq**2 / 720.0,
        (1.0 - torch.cos(angle)) / safe_sq,
    )
    k = skew(rotvec)
    eye = torch.eye(3, dtype=rotvec.dtype, device=rotvec.device).expand_as(k)
    return eye + sinc * k + cosc * (k @ k)
