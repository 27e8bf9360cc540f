"""
Expression-conditioned displacement decoder.

Input is the concatenation (delta, psi, theta_jaw); output is a d x d displacement
map squashed by scale * tanh so every texel stays inside [-scale, scale].

Two architectures are available through DecoderSpec.kind:

- "conv": a fully connected layer onto a coarse grid followed by 2x upsampling
  stages of 3x3 convolutions with leaky ReLU, then a 1-channel 3x3 convolution.
- "linear": one fully connected layer straight onto the d x d grid.
"""

import logging
import math
import pickle
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import Tensor, nn

from ..common.errors import AssetFormatError, ConfigurationError, DimensionError
from ..common.mixins import MapExportMixin, TensorFieldsMixin
from ..common.tensors import DTYPE, as_float

logger = logging.getLogger(__name__)

DISPLACEMENT_SCALE = 0.01


@dataclass(frozen=True)
class DecoderSpec:
    kind: str = "conv"
    n_detail: int = 128
    n_expression: int = 50
    n_jaw: int = 3
    size: int = 256
    base: int = 16
    width: int = 64
    min_channels: int = 8
    negative_slope: float = 0.2
    scale: float = DISPLACEMENT_SCALE

    def __post_init__(self) -> None:
        if self.kind not in ("conv", "linear"):
            raise ConfigurationError(f"unknown decoder kind {self.kind!r}")
        if min(self.n_detail, self.size, self.base, self.width) < 1 or self.n_expression < 0 or self.n_jaw < 0:
            raise ConfigurationError("decoder sizes must be positive")
        if self.scale <= 0:
            raise ConfigurationError("decoder output scale must be positive")
        if self.kind == "conv":
            ratio = self.size / self.base
            if ratio < 1 or ratio != 2 ** round(math.log2(ratio)):
                raise ConfigurationError(f"size {self.size} must be base {self.base} times a power of two")

    @property
    def input_width(self) -> int:
        return self.n_detail + self.n_expression + self.n_jaw

    @property
    def n_stages(self) -> int:
        return round(math.log2(self.size / self.base)) if self.kind == "conv" else 0

    def channels(self) -> list[int]:
        return [max(self.width >> i, self.min_channels) for i in range(self.n_stages + 1)]

    def to_dict(self) -> dict:
        return asdict(self)


class DetailDecoder(nn.Module):
    def __init__(self, spec: DecoderSpec = DecoderSpec(), seed: int | None = 0) -> None:
        super().__init__()
        self.spec = spec
        with torch.random.fork_rng(devices=[]):
            if seed is not None:
                torch.manual_seed(seed)
            self._build()
        self.to(DTYPE)

    def _build(self) -> None:
        spec = self.spec
        if spec.kind == "linear":
            self.head = nn.Linear(spec.input_width, spec.size * spec.size)
            self.body = nn.Identity()
            return
        channels = spec.channels()
        self.head = nn.Linear(spec.input_width, channels[0] * spec.base * spec.base)
        layers: list[nn.Module] = []
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(c_in, c_out, kernel_size=3, padding=1),
                nn.LeakyReLU(spec.negative_slope),
            ]
        layers.append(nn.Conv2d(channels[-1], 1, kernel_size=3, padding=1))
        self.body = nn.Sequential(*layers)

    def forward(self, delta: Tensor, expression: Tensor, jaw: Tensor) -> Tensor:
        """Batched or single inputs; returns (B, d, d) or (d, d)"""
        single = delta.ndim == 1
        x = torch.cat([delta.reshape(-1, delta.shape[-1]), expression.reshape(-1, expression.shape[-1]),
                       jaw.reshape(-1, jaw.shape[-1])], dim=1)  # fmt: skip
        spec = self.spec
        hidden = self.head(x)
        if spec.kind == "linear":
            raw = hidden.reshape(-1, spec.size, spec.size)
        else:
            grid = hidden.reshape(-1, spec.channels()[0], spec.base, spec.base)
            raw = self.body(grid)[:, 0]
        out = spec.scale * torch.tanh(raw)
        return out[0] if single else out

    def zero_(self) -> "DetailDecoder":
        with torch.no_grad():
            for parameter in self.parameters():
                parameter.zero_()
        return self


@dataclass(frozen=True, eq=False)
class DisplacementMap(MapExportMixin, TensorFieldsMixin):
    data: Tensor  # (d, d)
    scale: float = DISPLACEMENT_SCALE

    @property
    def size(self) -> int:
        return int(self.data.shape[0])

    @property
    def png_range(self) -> tuple[float, float]:
        return (-self.scale, self.scale)

    @classmethod
    def zeros(cls, size: int) -> "DisplacementMap":
        return cls(torch.zeros(size, size, dtype=DTYPE))


def decode_displacement(decoder: DetailDecoder, delta, expression, jaw) -> DisplacementMap:
    spec = decoder.spec
    delta, expression, jaw = as_float(delta), as_float(expression), as_float(jaw)
    for name, value, width in (
        ("delta", delta, spec.n_detail),
        ("expression (psi)", expression, spec.n_expression),
        ("jaw pose", jaw, spec.n_jaw),
    ):
        if value.ndim != 1 or value.shape[0] != width:
            raise DimensionError(f"{name} must have {width} entries, got shape {tuple(value.shape)}")
    return DisplacementMap(decoder(delta, expression, jaw), scale=spec.scale)


def save_decoder(path: str | Path, decoder: DetailDecoder) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"spec": decoder.spec.to_dict(), "state": decoder.state_dict()}, path)
    return path


def load_decoder(path: str | Path) -> DetailDecoder:
    path = Path(path)
    if not path.is_file():
        raise AssetFormatError(f"{path} does not exist")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except (RuntimeError, EOFError, ValueError, pickle.UnpicklingError) as exc:
        raise AssetFormatError(f"{path} is not a saved decoder: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("spec"), dict) or "state" not in payload:
        raise AssetFormatError(f"{path} lacks the decoder spec or weights")
    try:
        decoder = DetailDecoder(DecoderSpec(**payload["spec"]), seed=None)
        decoder.load_state_dict(payload["state"])
    except (TypeError, RuntimeError) as exc:
        raise AssetFormatError(f"{path} holds weights that do not match its spec: {exc}") from exc
    logger.debug("loaded %s decoder from %s", decoder.spec.kind, path)
    return decoder
