from .coarse import (
    coarse_regularizers,
    cosine_identity_loss,
    eye_closure_loss,
    identity_loss,
    landmark_loss,
    mask_area,
    photometric_loss,
)
from .detail import detail_regularizer, flip_horizontal, idmrf_loss, mrf_similarity_loss, symmetry_loss
from .extractor import FeatureExtractor, FeatureGrid, GradientHistogramExtractor, builtin_extractor
from .objectives import coarse_report, detail_consistency_loss, detail_report, shape_consistency_loss
from .weights import (
    COARSE_TERMS,
    DETAIL_TERMS,
    IMAGE_TERMS,
    LossReport,
    LossWeights,
    canonical_term,
    landmark_weight_table,
    report_from,
)

__all__ = [
    "COARSE_TERMS",
    "DETAIL_TERMS",
    "FeatureExtractor",
    "FeatureGrid",
    "GradientHistogramExtractor",
    "LossReport",
    "LossWeights",
    "IMAGE_TERMS",
    "builtin_extractor",
    "canonical_term",
    "coarse_regularizers",
    "coarse_report",
    "cosine_identity_loss",
    "detail_consistency_loss",
    "detail_regularizer",
    "detail_report",
    "eye_closure_loss",
    "flip_horizontal",
    "identity_loss",
    "idmrf_loss",
    "landmark_loss",
    "landmark_weight_table",
    "mask_area",
    "mrf_similarity_loss",
    "photometric_loss",
    "report_from",
    "shape_consistency_loss",
    "symmetry_loss",
]
