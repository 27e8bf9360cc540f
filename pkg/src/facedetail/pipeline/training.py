"""
Detail-decoder training with the detail-consistency swap, and the swap losses
used to check that delta carries subject detail while (psi, jaw) carry the
expression-dependent part.

At step t, image p of a subject with n images is paired with image
(p + 1 + t mod (n - 1)) mod n, so every ordered pair is visited once every
n - 1 steps.

With `TrainConfig.holdout = h` the last h images of every subject are kept out of
training. The swap losses can then be measured on those images, each rendered
with a delta learned from another image of its subject.
"""

import copy
import logging
import math
from dataclasses import dataclass, field

import torch
from torch import Tensor, nn
from tqdm import tqdm

from ..appearance.albedo import AlbedoModel
from ..common.errors import ConfigurationError, FittingDivergedError
from ..common.tensors import DTYPE
from ..detail.decoder import DetailDecoder
from ..losses.extractor import FeatureExtractor, builtin_extractor
from ..losses.weights import LossWeights
from ..model_core.head_model import ParametricHeadModel
from .code import LatentCode
from .config import FitConfig, TrainConfig
from .fitting import detail_objective, fit_coarse
from .optim import TraceRecorder, build_optimizer
from .renderer import CoarseState, FaceRenderer
from .subjects import SubjectSet

logger = logging.getLogger(__name__)

Key = tuple[int, int]


@dataclass(frozen=True, eq=False)
class TrainingSample:
    subject: int
    index: int
    image: Tensor
    mask: Tensor
    code: LatentCode
    state: CoarseState


@dataclass
class TrainResult:
    decoder: DetailDecoder
    details: dict[Key, Tensor]
    samples: dict[Key, TrainingSample] = field(repr=False, default_factory=dict)
    trace: TraceRecorder = field(default_factory=TraceRecorder)
    held_out: tuple[Key, ...] = ()


def swap_partner(position: int, step: int, count: int) -> int:
    """Partner of image `position` at training step `step` in a subject of `count` images"""
    if count < 2:
        raise ConfigurationError("a subject needs at least two images for the detail swap")
    return (position + 1 + step % (count - 1)) % count


def prepare_samples(
    subject_sets: list[SubjectSet],
    renderer: FaceRenderer,
    *,
    fit_config: FitConfig | None = None,
    weights: LossWeights = LossWeights(),
    extractor: FeatureExtractor | None = None,
) -> dict[Key, TrainingSample]:
    """Coarse codes (given or fitted) and their detached coarse states for every image"""
    samples: dict[Key, TrainingSample] = {}
    for s, subject in enumerate(subject_sets):
        for p, item in enumerate(subject.images):
            code = item.code
            if code is None:
                logger.info("fitting coarse code for subject %s image %d", subject.subject_id, p)
                code = fit_coarse(
                    renderer.model, None, item.image, item.landmarks, item.mask, fit_config or FitConfig(),
                    weights=weights, extractor=extractor, renderer=renderer,
                ).code  # fmt: skip
            with torch.no_grad():
                state = renderer.coarse_state(code).detached()
            samples[(s, p)] = TrainingSample(s, p, item.image.to(DTYPE), item.mask.bool(), code, state)
    return samples


def _initial_details(samples: dict[Key, TrainingSample], config: TrainConfig, n_detail: int) -> dict[Key, Tensor]:
    generator = torch.Generator().manual_seed(config.seed)
    details: dict[Key, Tensor] = {}
    tied: dict[int, Tensor] = {}
    for key in sorted(samples):
        if config.tie_subject_detail and key[0] in tied:
            details[key] = tied[key[0]]
            continue
        start = torch.randn(n_detail, generator=generator, dtype=DTYPE) * config.init_std
        details[key] = tied.setdefault(key[0], nn.Parameter(start)) if config.tie_subject_detail else nn.Parameter(start)
    return details


def detail_loss(
    renderer: FaceRenderer,
    decoder: DetailDecoder,
    sample: TrainingSample,
    delta: Tensor,
    weights: LossWeights,
    extractor: FeatureExtractor | None,
) -> Tensor:
    """L_detail of one image rendered with D = F_d(delta, psi, jaw) of that image"""
    report = detail_objective(
        renderer, sample.code, sample.state, decoder, delta, sample.image, sample.mask, weights, extractor
    )
    return report.total


def train_detail_decoder(
    model: ParametricHeadModel,
    subject_sets: list[SubjectSet],
    decoder_init: DetailDecoder,
    config: TrainConfig = TrainConfig(),
    *,
    albedo_model: AlbedoModel | None = None,
    renderer: FaceRenderer | None = None,
    weights: LossWeights = LossWeights(),
    extractor: FeatureExtractor | None = None,
    fit_config: FitConfig | None = None,
) -> TrainResult:
    """
    Jointly optimize the decoder weights and one delta per image.

    Each step sums L_detail over every image plus lambda_dc times L_detail of the
    image rendered with its partner's delta. The input decoder is left untouched.
    """
    for subject in subject_sets:
        if len(subject) - config.holdout < 2:
            raise ConfigurationError(
                f"subject {subject.subject_id!r} needs at least two training images besides {config.holdout} held out"
            )
    if len(subject_sets) < 2:
        logger.warning("training with a single subject: delta cannot separate subjects")
    if renderer is None:
        if albedo_model is None:
            raise ConfigurationError("either a renderer or an albedo model is required")
        renderer = FaceRenderer(model, albedo_model, tuple(subject_sets[0].images[0].image.shape[:2]))
    extractor = extractor or builtin_extractor()
    if decoder_init.spec.size != renderer.uv_size:
        raise ConfigurationError(f"decoder outputs {decoder_init.spec.size}^2 maps, UV size is {renderer.uv_size}")

    samples = prepare_samples(subject_sets, renderer, fit_config=fit_config, weights=weights, extractor=extractor)
    sizes = {s: len(subject) - config.holdout for s, subject in enumerate(subject_sets)}
    training = {key: sample for key, sample in samples.items() if key[1] < sizes[key[0]]}
    held_out = tuple(sorted(set(samples) - set(training)))
    decoder = copy.deepcopy(decoder_init)
    decoder.requires_grad_(True)
    details = _initial_details(training, config, decoder.spec.n_detail)
    unique_details = list({id(d): d for d in details.values()}.values())
    groups = []
    if config.decoder_learning_rate > 0:
        groups.append({"params": list(decoder.parameters()), "lr": config.decoder_learning_rate, "name": "decoder"})
    if config.code_learning_rate > 0:
        groups.append({"params": unique_details, "lr": config.code_learning_rate, "name": "detail"})
    optimizer, scheduler = build_optimizer(groups, config.optimizer, config.iterations)
    trace = TraceRecorder()
    best = math.inf

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        for step in tqdm(range(config.iterations), desc="train-decoder", disable=not config.progress, leave=False):
            checkpoint = {k: v.detach().clone() for k, v in decoder.state_dict().items()}
            own = torch.zeros((), dtype=DTYPE)
            swapped = torch.zeros((), dtype=DTYPE)
            for key, sample in training.items():
                own = own + detail_loss(renderer, decoder, sample, details[key], weights, extractor)
                if weights.detail_consistency:
                    partner = (key[0], swap_partner(key[1], step, sizes[key[0]]))
                    swapped = swapped + detail_loss(renderer, decoder, sample, details[partner], weights, extractor)
            total = own + weights.detail_consistency * swapped
            value = float(total.detach())
            if not math.isfinite(value):
                decoder.load_state_dict(checkpoint)
                logger.error("decoder training diverged at step %d", step)
                raise FittingDivergedError(
                    f"non-finite training loss at step {step}", trace=trace.rows, checkpoint=decoder
                )
            best = min(best, value)
            trace.record("train", step, {"detail": float(own.detach()), "consistency": float(swapped.detach()), "total": value}, best)
            if config.log_every and step % config.log_every == 0:
                logger.info("train step %d: total %.6g (detail %.6g, swap %.6g)", step, value, float(own.detach()), float(swapped.detach()))
            if optimizer is None or not total.requires_grad:
                continue
            optimizer.zero_grad(set_to_none=True)
            total.backward()
            optimizer.step()
            scheduler.step()

    final = {key: delta.detach().clone() for key, delta in details.items()}
    return TrainResult(decoder=decoder, details=final, samples=samples, trace=trace, held_out=held_out)


#################
## SWAP EVALUATION
#################
def _pair_loss(renderer, decoder, samples, details, target: Key, source: Key, weights, extractor) -> float:
    with torch.no_grad():
        return float(detail_loss(renderer, decoder, samples[target], details[source], weights, extractor))


def swap_loss_matrix(
    renderer: FaceRenderer,
    result: TrainResult,
    *,
    held_out: bool = False,
    weights: LossWeights = LossWeights(),
    extractor: FeatureExtractor | None = None,
) -> dict[tuple[Key, Key], float]:
    """
    L_detail of each target image (row key) rendered with each trained delta (column key).

    Targets are the training images, or the held-out images when `held_out` is set.
    """
    extractor = extractor or builtin_extractor()
    if held_out and not result.held_out:
        raise ConfigurationError("the decoder was trained without held-out images")
    targets = result.held_out if held_out else sorted(result.details)
    sources = sorted(result.details)
    return {
        (target, source): _pair_loss(renderer, result.decoder, result.samples, result.details, target, source, weights, extractor)
        for target in targets
        for source in sources
    }


def within_subject_swap_loss(renderer: FaceRenderer, result: TrainResult, **kwargs) -> float:
    """Mean L_detail over ordered pairs of distinct images of the same subject"""
    matrix = swap_loss_matrix(renderer, result, **kwargs)
    values = [v for (t, s), v in matrix.items() if t[0] == s[0] and t != s]
    return sum(values) / len(values) if values else 0.0


def cross_subject_swap_loss(renderer: FaceRenderer, result: TrainResult, **kwargs) -> float:
    """Mean L_detail over ordered pairs of images from different subjects"""
    matrix = swap_loss_matrix(renderer, result, **kwargs)
    values = [v for (t, s), v in matrix.items() if t[0] != s[0]]
    return sum(values) / len(values) if values else 0.0
