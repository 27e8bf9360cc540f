"""
Analysis-by-synthesis fitting of coarse codes (single image and multi-image with
shape consistency) and of detail codes against a frozen decoder.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass

import torch
from torch import Tensor, nn

from ..appearance.albedo import AlbedoModel
from ..common.errors import ConfigurationError, DimensionError, FittingDivergedError
from ..common.tensors import DTYPE, as_float
from ..detail.decoder import DetailDecoder, DisplacementMap
from ..losses.extractor import FeatureExtractor, builtin_extractor
from ..losses.objectives import coarse_report, detail_report, shape_consistency_loss
from ..losses.weights import LossReport, LossWeights, landmark_weight_table
from ..model_core.geometry import surface_landmarks
from ..model_core.head_model import ParametricHeadModel
from ..model_core.mesh import Mesh
from .code import LatentCode
from .config import DetailFitConfig, FitConfig, OptimizerConfig
from .optim import CodeParameters, TraceRecorder, param_groups, run_stage
from .renderer import CoarseState, FaceRenderer
from .subjects import SubjectImage, SubjectSet

logger = logging.getLogger(__name__)


@dataclass
class FitResult:
    code: LatentCode
    report: LossReport
    trace: TraceRecorder


@dataclass
class MultiFitResult:
    codes: list[LatentCode]
    report: LossReport
    trace: TraceRecorder
    swap_losses: list[float]
    results: list[FitResult] | None = None


@dataclass
class DetailFitResult:
    detail: Tensor
    displacement: DisplacementMap
    code: LatentCode
    report: LossReport
    trace: TraceRecorder


#################
## HELPERS
#################
def initial_camera(model: ParametricHeadModel, landmarks: Tensor) -> tuple[float, Tensor]:
    """Closed-form scale and translation matching the template landmarks' spread and centroid"""
    template = Mesh(model.template, model.triangles, model.uv)
    rest = surface_landmarks(template, model.landmark_embedding)[:, :2]
    target = as_float(landmarks)
    rest_centred = rest - rest.mean(dim=0)
    target_centred = target - target.mean(dim=0)
    denom = float((rest_centred**2).sum())
    if denom <= 0:
        raise DimensionError("template landmarks are degenerate")
    scale = (float((target_centred**2).sum()) / denom) ** 0.5
    if scale <= 0:
        raise ConfigurationError("target landmarks are all identical")
    return scale, target.mean(dim=0) - scale * rest.mean(dim=0)


def free_joint_indices(model: ParametricHeadModel, names) -> list[int]:
    out = []
    for name in names:
        if name == "root":
            out.append(0)
        elif name in model.joint_names:
            out.append(model.joint_names.index(name))
    return out


def initial_code(model: ParametricHeadModel, n_albedo: int, landmarks: Tensor) -> LatentCode:
    scale, translation = initial_camera(model, landmarks)
    return LatentCode.zeros(model, n_albedo, scale=scale, translation=translation)


def coarse_objective(
    renderer: FaceRenderer,
    code: LatentCode,
    target: SubjectImage,
    weights: LossWeights,
    extractor: FeatureExtractor | None,
    landmark_weights: Tensor,
) -> LossReport:
    """L_coarse for one image; renders only when an image term is switched on"""
    rendered = None
    if weights.photometric or weights.identity:
        result = renderer.render(code)
        rendered, projected, points_3d = result.image, result.landmarks_2d, result.landmarks_3d
    else:
        projected, points_3d = renderer.landmarks(code)
    return coarse_report(
        weights=weights,
        extractor=extractor,
        image=target.image,
        mask=target.mask,
        rendered=rendered,
        target_landmarks=target.landmarks,
        projected_landmarks=projected,
        landmarks_3d=points_3d,
        eyelid_pairs=renderer.model.eyelid_pairs,
        scale=code.scale,
        landmark_weights=landmark_weights,
        shape=code.shape,
        expression=code.expression,
        albedo=code.albedo,
    )


def _renderer_for(model, albedo_model, renderer, image_size) -> FaceRenderer:
    if renderer is not None:
        return renderer
    if albedo_model is None:
        raise ConfigurationError("either a renderer or an albedo model is required")
    return FaceRenderer(model, albedo_model, image_size)


def _check_image(image: Tensor, landmarks: Tensor, mask: Tensor) -> None:
    if image.ndim != 3 or image.shape[-1] != 3:
        raise DimensionError(f"image must be (H, W, 3), got {tuple(image.shape)}")
    if tuple(landmarks.shape) != (68, 2):
        raise DimensionError(f"landmarks must be 68 x 2, got {tuple(landmarks.shape)}")
    if tuple(mask.shape[:2]) != tuple(image.shape[:2]):
        raise DimensionError("mask must match the image resolution")


@contextmanager
def frozen_module(module: nn.Module):
    """Temporarily switch off gradients for every parameter of a module"""
    flags = [p.requires_grad for p in module.parameters()]
    module.requires_grad_(False)
    try:
        yield module
    finally:
        for parameter, flag in zip(module.parameters(), flags):
            parameter.requires_grad_(flag)


#################
## COARSE FITTING
#################
def fit_coarse(
    model: ParametricHeadModel,
    albedo_model: AlbedoModel | None,
    image: Tensor,
    landmarks: Tensor,
    mask: Tensor,
    config: FitConfig = FitConfig(),
    *,
    weights: LossWeights = LossWeights(),
    extractor: FeatureExtractor | None = None,
    renderer: FaceRenderer | None = None,
    init: LatentCode | None = None,
) -> FitResult:
    """
    Staged Adam minimization of L_coarse (landmark warm-up, then the full objective).

    Without `init` the code starts at zero with a camera fitted to the landmarks.
    """
    image, landmarks = as_float(image), as_float(landmarks)
    _check_image(image, landmarks, mask)
    renderer = _renderer_for(model, albedo_model, renderer, tuple(image.shape[:2]))
    extractor = extractor or builtin_extractor()
    target = SubjectImage(image=image, landmarks=landmarks, mask=mask.bool())
    code = init if init is not None else initial_code(model, renderer.albedo_model.n_albedo, landmarks)
    code.check(model, renderer.albedo_model.n_albedo)

    params = CodeParameters(code, free_joint_indices(model, config.free_joints))
    landmark_weights = landmark_weight_table()
    trace = TraceRecorder()
    report = None
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        for stage in config.stages:
            stage_weights = weights if stage.image_terms else weights.landmark_only()
            report = _run_code_stage(
                stage.name,
                lambda w=stage_weights: coarse_objective(renderer, params.code(), target, w, extractor, landmark_weights),
                [params],
                param_groups(params.groups(), config.learning_rates, stage.frozen),
                config,
                stage.iterations,
                trace,
            )
    if report is None:
        with torch.no_grad():
            report = coarse_objective(renderer, params.code(), target, weights, extractor, landmark_weights).detached()
    return FitResult(code=params.final_code(), report=report, trace=trace)


def _run_code_stage(name, objective, params_list, groups, config: FitConfig, iterations, trace) -> LossReport:
    def snapshot():
        return [p.snapshot() for p in params_list]

    def restore(states):
        for p, state in zip(params_list, states):
            p.restore(state)

    def checkpoint(states):
        restore(states)
        return [p.final_code() for p in params_list]

    return run_stage(
        name,
        objective,
        groups,
        config.optimizer,
        iterations,
        snapshot,
        restore,
        trace,
        checkpoint=checkpoint,
        log_every=config.log_every,
        progress=config.progress,
    )


def fit_multi(
    model: ParametricHeadModel,
    albedo_model: AlbedoModel | None,
    subject: SubjectSet,
    config: FitConfig = FitConfig(),
    *,
    weights: LossWeights = LossWeights(),
    extractor: FeatureExtractor | None = None,
    renderer: FaceRenderer | None = None,
    inits: list[LatentCode] | None = None,
) -> MultiFitResult:
    """
    Joint fit of every image of one subject with the shape-consistency swap:
    image i is re-rendered with beta of image (i + 1) mod N.

    With a zero shape-consistency weight and no shared shape the images are
    fitted independently, exactly as fit_coarse would.
    """
    if len(subject) < 2:
        raise ConfigurationError("fit_multi needs at least two images of the subject")
    images = subject.images
    if not weights.shape_consistency and not config.shared_shape:
        results = [
            fit_coarse(
                model, albedo_model, item.image, item.landmarks, item.mask, config,
                weights=weights, extractor=extractor, renderer=renderer,
                init=None if inits is None else inits[i],
            )  # fmt: skip
            for i, item in enumerate(images)
        ]
        merged = results[0].report
        for i, result in enumerate(results[1:], start=1):
            merged = merged.merged(result.report, prefix=f"image{i}/")
        trace = TraceRecorder()
        for i, result in enumerate(results):
            trace.rows += [dict(row, image=i) for row in result.trace.rows]
        return MultiFitResult([r.code for r in results], merged, trace, [], results)

    renderer = _renderer_for(model, albedo_model, renderer, tuple(images[0].image.shape[:2]))
    extractor = extractor or builtin_extractor()
    n_albedo = renderer.albedo_model.n_albedo
    targets = [
        SubjectImage(image=as_float(item.image), landmarks=as_float(item.landmarks), mask=item.mask.bool())
        for item in images
    ]
    for target in targets:
        _check_image(target.image, target.landmarks, target.mask)
    codes = inits or [initial_code(model, n_albedo, t.landmarks) for t in targets]
    free = free_joint_indices(model, config.free_joints)
    shared = nn.Parameter(torch.stack([c.shape for c in codes]).mean(dim=0)) if config.shared_shape else None
    params = [CodeParameters(code, free, shape=shared) for code in codes]
    landmark_weights = landmark_weight_table()
    n = len(params)

    def objective(stage_weights: LossWeights, with_swap: bool) -> LossReport:
        current = [p.code() for p in params]
        merged: LossReport | None = None
        for i, (code, target) in enumerate(zip(current, targets)):
            report = coarse_objective(renderer, code, target, stage_weights, extractor, landmark_weights)
            if with_swap:
                partner = current[(i + 1) % n].shape
                swap = shape_consistency_loss(renderer, code, partner, target.image, target.mask, extractor, stage_weights)
                report.terms["shape_consistency"] = swap
                report.weights["shape_consistency"] = stage_weights.shape_consistency
            merged = report if merged is None else merged.merged(report, prefix=f"image{i}/")
        return merged

    trace = TraceRecorder()
    report = None
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        for stage in config.stages:
            stage_weights = weights if stage.image_terms else weights.landmark_only()
            with_swap = bool(stage_weights.shape_consistency) and shared is None
            groups = []
            for p in params:
                groups += param_groups(p.groups(), config.learning_rates, stage.frozen)
            # a shared shape tensor appears in every code but is optimized once
            unique, seen = [], set()
            for group in groups:
                if id(group["params"][0]) not in seen:
                    seen.add(id(group["params"][0]))
                    unique.append(group)
            report = _run_code_stage(
                stage.name,
                lambda w=stage_weights, s=with_swap: objective(w, s),
                params,
                unique,
                config,
                stage.iterations,
                trace,
            )

    final_codes = [p.final_code() for p in params]
    with torch.no_grad():
        swap_losses = [
            float(shape_consistency_loss(
                renderer, final_codes[i], final_codes[(i + 1) % n].shape,
                targets[i].image, targets[i].mask, extractor, weights,
            ))  # fmt: skip
            for i in range(n)
        ]
        if report is None:
            report = objective(weights, False).detached()
    return MultiFitResult(final_codes, report, trace, swap_losses)


#################
## DETAIL FITTING
#################
def detail_objective(
    renderer: FaceRenderer,
    code: LatentCode,
    state: CoarseState,
    decoder: DetailDecoder,
    delta: Tensor,
    image: Tensor,
    mask: Tensor,
    weights: LossWeights,
    extractor: FeatureExtractor | None,
) -> LossReport:
    displacement = decoder(delta, code.expression, code.jaw_pose)
    result = renderer.render_detail(code, displacement, coarse=state)
    return detail_report(
        weights=weights,
        extractor=extractor,
        image=image,
        mask=mask,
        rendered=result.image,
        displacement=displacement,
        uv_mask=state.uv_mask,
    )


def fit_detail(
    model: ParametricHeadModel,
    coarse_code: LatentCode,
    decoder: DetailDecoder,
    image: Tensor,
    mask: Tensor,
    config: DetailFitConfig = DetailFitConfig(),
    *,
    albedo_model: AlbedoModel | None = None,
    weights: LossWeights = LossWeights(),
    extractor: FeatureExtractor | None = None,
    renderer: FaceRenderer | None = None,
    init_detail: Tensor | None = None,
) -> DetailFitResult:
    """Optimize delta alone; the coarse code and the decoder stay fixed"""
    image = as_float(image)
    renderer = _renderer_for(model, albedo_model, renderer, tuple(image.shape[:2]))
    extractor = extractor or builtin_extractor()
    if decoder.spec.size != renderer.uv_size:
        raise ConfigurationError(f"decoder outputs {decoder.spec.size}^2 maps, UV size is {renderer.uv_size}")
    code = coarse_code.clone()
    with torch.no_grad():
        state = renderer.coarse_state(code).detached()
    start = code.detail if init_detail is None else as_float(init_detail)
    if start.shape[0] != decoder.spec.n_detail:
        start = torch.zeros(decoder.spec.n_detail, dtype=DTYPE)
    delta = nn.Parameter(start.detach().clone())
    mask = mask.bool()
    trace = TraceRecorder()

    with frozen_module(decoder), torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        report = run_stage(
            "detail",
            lambda: detail_objective(renderer, code, state, decoder, delta, image, mask, weights, extractor),
            [{"params": [delta], "lr": config.learning_rate, "name": "detail"}] if config.learning_rate > 0 else [],
            config.optimizer,
            config.iterations,
            lambda: delta.detach().clone(),
            lambda saved: delta.data.copy_(saved),
            trace,
            log_every=config.log_every,
            progress=config.progress,
        )
        with torch.no_grad():
            displacement = decoder(delta, code.expression, code.jaw_pose).clone()
    final = delta.detach().clone()
    return DetailFitResult(
        detail=final,
        displacement=DisplacementMap(displacement, scale=decoder.spec.scale),
        code=code.replace(detail=final),
        report=report,
        trace=trace,
    )
