from .animation import AnimationFrame, RetargetResult, animate_sequence, retarget, retarget_code
from .code import DETAIL_DIM, LIGHT_DIM, LatentCode
from .config import (
    DetailFitConfig,
    FitConfig,
    OptimizerConfig,
    RenderConfig,
    RunConfig,
    StageConfig,
    TrainConfig,
    load_run_config,
    run_config_from_dict,
)
from .fitting import DetailFitResult, FitResult, MultiFitResult, fit_coarse, fit_detail, fit_multi, initial_camera
from .optim import CodeParameters, TraceRecorder, run_stage
from .renderer import CoarseState, FaceRenderer, RenderResult
from .subjects import SubjectImage, SubjectSet, load_subject_sets
from .synthetic import perturb_code, random_code, separable_detail_fixture, synthesize_sample
from .training import (
    TrainResult,
    cross_subject_swap_loss,
    swap_loss_matrix,
    swap_partner,
    train_detail_decoder,
    within_subject_swap_loss,
)

__all__ = [
    "AnimationFrame",
    "CoarseState",
    "CodeParameters",
    "DETAIL_DIM",
    "DetailFitConfig",
    "DetailFitResult",
    "FaceRenderer",
    "FitConfig",
    "FitResult",
    "LIGHT_DIM",
    "LatentCode",
    "MultiFitResult",
    "OptimizerConfig",
    "RenderConfig",
    "RenderResult",
    "RetargetResult",
    "RunConfig",
    "StageConfig",
    "SubjectImage",
    "SubjectSet",
    "TraceRecorder",
    "TrainConfig",
    "TrainResult",
    "animate_sequence",
    "cross_subject_swap_loss",
    "fit_coarse",
    "fit_detail",
    "fit_multi",
    "initial_camera",
    "load_run_config",
    "load_subject_sets",
    "perturb_code",
    "random_code",
    "retarget",
    "retarget_code",
    "run_config_from_dict",
    "run_stage",
    "separable_detail_fixture",
    "swap_loss_matrix",
    "swap_partner",
    "synthesize_sample",
    "train_detail_decoder",
    "within_subject_swap_loss",
]
