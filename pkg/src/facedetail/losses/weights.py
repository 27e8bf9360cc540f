"""
Loss weights, the per-landmark weight table and the LossReport container.

Term names used throughout (and accepted by `--disable-term`):

- coarse: landmark, eye, photometric, identity, shape_consistency,
  shape_reg, expression_reg, albedo_reg
- detail: photometric_detail, mrf, symmetry, detail_consistency, detail_reg
"""

from dataclasses import asdict, dataclass, field, fields, replace

import torch
from torch import Tensor

from ..common.errors import ConfigurationError
from ..model_core.head_model import LANDMARK_COUNT

COARSE_TERMS = (
    "landmark",
    "eye",
    "photometric",
    "identity",
    "shape_consistency",
    "shape_reg",
    "expression_reg",
    "albedo_reg",
)
DETAIL_TERMS = ("photometric_detail", "mrf", "symmetry", "detail_consistency", "detail_reg")
IMAGE_TERMS = ("photometric", "identity", "shape_consistency", "albedo_reg")

TERM_ALIASES = {
    "lmk": "landmark",
    "pho": "photometric",
    "id": "identity",
    "sc": "shape_consistency",
    "beta": "shape_reg",
    "psi": "expression_reg",
    "alpha": "albedo_reg",
    "phoD": "photometric_detail",
    "sym": "symmetry",
    "dc": "detail_consistency",
    "regD": "detail_reg",
}

MOUTH = range(48, 68)
NOSE = range(27, 36)
KEY_LANDMARKS = (30, 48, 54)


def canonical_term(name: str) -> str:
    name = TERM_ALIASES.get(name, name)
    if name not in COARSE_TERMS + DETAIL_TERMS:
        raise ConfigurationError(f"unknown loss term {name!r}")
    return name


@dataclass(frozen=True)
class LossWeights:
    landmark: float = 1.0
    eye: float = 1.0
    photometric: float = 2.0
    identity: float = 0.2
    shape_consistency: float = 1.0
    shape_reg: float = 1e-4
    expression_reg: float = 1e-4
    albedo_reg: float = 1e-4
    photometric_detail: float = 2.0
    mrf: float = 5e-2
    symmetry: float = 5e-3
    detail_consistency: float = 1.0
    detail_reg: float = 5e-3

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not value >= 0:
                raise ConfigurationError(f"loss weight {f.name} must be >= 0, got {value}")

    def without(self, *names: str) -> "LossWeights":
        """Copy with the named terms switched off"""
        return replace(self, **{canonical_term(n): 0.0 for n in names})

    def landmark_only(self) -> "LossWeights":
        """Weights of the landmark pretraining stage: image terms off"""
        return self.without(*IMAGE_TERMS)

    def updated(self, values: dict[str, float]) -> "LossWeights":
        return replace(self, **{canonical_term(k): float(v) for k, v in values.items()})

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict[str, float]) -> "LossWeights":
        return cls().updated(values)


def landmark_weight_table(count: int = LANDMARK_COUNT) -> Tensor:
    """Mouth corners and nose tip 3.0, other mouth and nose points 1.5, the rest 1.0"""
    weights = torch.ones(count, dtype=torch.float64)
    for group in (MOUTH, NOSE):
        weights[[i for i in group if i < count]] = 1.5
    weights[[i for i in KEY_LANDMARKS if i < count]] = 3.0
    return weights


@dataclass
class LossReport:
    """Named scalar terms, their weights and the weighted total"""

    terms: dict[str, Tensor]
    weights: dict[str, float]
    normalized: dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> Tensor:
        total = None
        for name, term in self.terms.items():
            contribution = self.weights[name] * term
            total = contribution if total is None else total + contribution
        return total if total is not None else torch.zeros((), dtype=torch.float64)

    def values(self) -> dict[str, float]:
        out = {name: float(term.detach()) for name, term in self.terms.items()}
        out.update({f"{name}_normalized": value for name, value in self.normalized.items()})
        out["total"] = float(self.total.detach())
        return out

    def detached(self) -> "LossReport":
        return LossReport({k: v.detach() for k, v in self.terms.items()}, dict(self.weights), dict(self.normalized))

    def merged(self, other: "LossReport", prefix: str = "") -> "LossReport":
        terms = dict(self.terms)
        weights = dict(self.weights)
        normalized = dict(self.normalized)
        for name, term in other.terms.items():
            terms[prefix + name] = term
            weights[prefix + name] = other.weights[name]
        normalized.update({prefix + k: v for k, v in other.normalized.items()})
        return LossReport(terms, weights, normalized)


def report_from(terms: dict[str, Tensor], weights: LossWeights, normalized: dict[str, float] | None = None) -> LossReport:
    table = weights.to_dict()
    return LossReport(terms=terms, weights={k: table[k] for k in terms}, normalized=normalized or {})
