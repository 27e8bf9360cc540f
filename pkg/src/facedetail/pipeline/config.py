"""
Run configuration: loss weights, fitting schedules, decoder training, decoder
architecture and render sizes.

Everything is a frozen dataclass. `load_run_config` reads TOML (tomllib) or JSON
with one table per section; `RunConfig.with_overrides` applies CLI flags on top.

    [weights]
    photometric = 2.0
    [fit]
    seed = 3
    [[fit.stages]]
    name = "landmarks"
    iterations = 200
    image_terms = false
"""

import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from ..common.errors import ConfigurationError
from ..detail.decoder import DecoderSpec
from ..losses.weights import LossWeights

PARAMETER_GROUPS = ("shape", "expression", "pose", "albedo", "light", "scale", "translation")

# Per-group Adam rates for code fitting, in place of the single reference rate 1e-4 that
# decoder training keeps (TrainConfig.decoder_learning_rate). Translation is in pixels,
# the coefficient groups are unit-variance.
DEFAULT_LEARNING_RATES = {
    "shape": 0.02,
    "expression": 0.02,
    "pose": 0.01,
    "albedo": 0.02,
    "light": 0.02,
    "scale": 0.005,
    "translation": 0.5,
}


@dataclass(frozen=True)
class OptimizerConfig:
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    schedule: str = "cosine"

    def __post_init__(self) -> None:
        if self.schedule not in ("cosine", "constant"):
            raise ConfigurationError(f"unknown schedule {self.schedule!r}")
        if not (0 <= self.betas[0] < 1 and 0 <= self.betas[1] < 1) or self.eps <= 0:
            raise ConfigurationError("invalid Adam hyperparameters")


@dataclass(frozen=True)
class StageConfig:
    name: str
    iterations: int
    image_terms: bool = True
    frozen: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ConfigurationError(f"stage {self.name!r} has a negative iteration count")
        unknown = set(self.frozen) - set(PARAMETER_GROUPS)
        if unknown:
            raise ConfigurationError(f"unknown parameter groups {sorted(unknown)}")
        object.__setattr__(self, "frozen", tuple(self.frozen))


DEFAULT_STAGES = (
    StageConfig("landmarks", 500, image_terms=False, frozen=("albedo", "light")),
    StageConfig("full", 1500),
)


@dataclass(frozen=True)
class FitConfig:
    stages: tuple[StageConfig, ...] = DEFAULT_STAGES
    learning_rates: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LEARNING_RATES))
    optimizer: OptimizerConfig = OptimizerConfig()
    free_joints: tuple[str, ...] = ("root", "jaw")
    shared_shape: bool = False
    seed: int = 0
    log_every: int = 100
    progress: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "free_joints", tuple(self.free_joints))
        rates = dict(DEFAULT_LEARNING_RATES)
        rates.update(self.learning_rates)
        if set(rates) - set(PARAMETER_GROUPS) or any(v < 0 for v in rates.values()):
            raise ConfigurationError(f"invalid learning rates {rates}")
        object.__setattr__(self, "learning_rates", rates)

    def with_iterations(self, *counts: int) -> "FitConfig":
        stages = tuple(replace(stage, iterations=n) for stage, n in zip(self.stages, counts))
        return replace(self, stages=stages)


@dataclass(frozen=True)
class DetailFitConfig:
    iterations: int = 1000
    learning_rate: float = 0.01
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    log_every: int = 100
    progress: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 0 or self.learning_rate < 0:
            raise ConfigurationError("detail fit iterations and learning rate must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000
    decoder_learning_rate: float = 1e-4
    code_learning_rate: float = 1e-2
    init_std: float = 0.01
    tie_subject_detail: bool = False
    holdout: int = 0
    optimizer: OptimizerConfig = OptimizerConfig(schedule="constant")
    seed: int = 0
    log_every: int = 100
    progress: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 0 or self.decoder_learning_rate < 0 or self.code_learning_rate < 0 or self.init_std < 0:
            raise ConfigurationError("training iterations, rates and init std must be >= 0")
        if self.holdout < 0:
            raise ConfigurationError("holdout must be >= 0")


@dataclass(frozen=True)
class RenderConfig:
    image_size: int = 224
    uv_size: int = 256
    n_albedo: int = 50

    def __post_init__(self) -> None:
        if min(self.image_size, self.uv_size) < 1 or self.n_albedo < 0:
            raise ConfigurationError("image and UV sizes must be positive")


@dataclass(frozen=True)
class RunConfig:
    weights: LossWeights = LossWeights()
    fit: FitConfig = FitConfig()
    detail_fit: DetailFitConfig = DetailFitConfig()
    train: TrainConfig = TrainConfig()
    decoder: DecoderSpec = DecoderSpec()
    render: RenderConfig = RenderConfig()
    output_dir: Path = Path("out")
    seed: int = 0

    def with_overrides(
        self,
        seed: int | None = None,
        output_dir: str | Path | None = None,
        disabled_terms: tuple[str, ...] = (),
    ) -> "RunConfig":
        config = self
        if seed is not None:
            config = replace(
                config,
                seed=seed,
                fit=replace(config.fit, seed=seed),
                detail_fit=replace(config.detail_fit, seed=seed),
                train=replace(config.train, seed=seed),
            )
        if output_dir is not None:
            config = replace(config, output_dir=Path(output_dir))
        if disabled_terms:
            config = replace(config, weights=config.weights.without(*disabled_terms))
        return config

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["output_dir"] = str(self.output_dir)
        return data


def _section(cls, data: dict[str, Any] | None, base):
    if not data:
        return base
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    values = dict(data)
    if "optimizer" in values:
        values["optimizer"] = OptimizerConfig(**{k: tuple(v) if k == "betas" else v for k, v in values["optimizer"].items()})
    if "stages" in values:
        values["stages"] = tuple(StageConfig(**s) for s in values["stages"])
    try:
        return replace(base, **values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def run_config_from_dict(data: dict[str, Any]) -> RunConfig:
    base = RunConfig()
    known = {"weights", "fit", "detail_fit", "train", "decoder", "render", "output_dir", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    config = replace(
        base,
        weights=base.weights.updated(data.get("weights", {})),
        fit=_section(FitConfig, data.get("fit"), base.fit),
        detail_fit=_section(DetailFitConfig, data.get("detail_fit"), base.detail_fit),
        train=_section(TrainConfig, data.get("train"), base.train),
        decoder=_section(DecoderSpec, data.get("decoder"), base.decoder),
        render=_section(RenderConfig, data.get("render"), base.render),
        output_dir=Path(data.get("output_dir", base.output_dir)),
    )
    if "seed" in data:
        config = config.with_overrides(seed=int(data["seed"]))
    return config


def load_run_config(path: str | Path | None) -> RunConfig:
    """TOML or JSON by extension; no path gives the defaults"""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        if path.suffix.lower() == ".toml":
            with path.open("rb") as handle:
                data = tomllib.load(handle)
        elif path.suffix.lower() == ".json":
            data = json.loads(path.read_text())
        else:
            raise ConfigurationError(f"config must be .toml or .json, got {path.name}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    return run_config_from_dict(data)
