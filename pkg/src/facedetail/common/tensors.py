import numpy as np
import torch
from torch import Tensor

# Every differentiable quantity is carried in double precision
DTYPE = torch.float64


def as_float(value, dtype: torch.dtype = DTYPE) -> Tensor:
    if isinstance(value, Tensor):
        return value if value.dtype == dtype else value.to(dtype)
    return torch.as_tensor(np.asarray(value, dtype=np.float64), dtype=dtype)


def as_index(value) -> Tensor:
    if isinstance(value, Tensor):
        return value.to(torch.long)
    return torch.as_tensor(np.asarray(value, dtype=np.int64), dtype=torch.long)


def to_numpy(value) -> np.ndarray:
    if isinstance(value, Tensor):
        return value.detach().cpu().numpy()
    return np.asarray(value)
