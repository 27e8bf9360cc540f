"""
Landmark-consistency data filter: two detectors (or one detector on an image and
its shifted crop) should agree; images where any landmark disagrees by a tenth of
the face box or more are discarded.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..common.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    score: float
    worst: int  # landmark with the largest normalized disagreement


def landmark_consistency_filter(
    k1,
    k2,
    bbox_width: float,
    bbox_height: float,
    shift=(0.0, 0.0),
    threshold: float = DEFAULT_THRESHOLD,
) -> FilterDecision:
    """Score max_i |diag(w, h)^-1 (k2_i - shift - k1_i)|_2; discard when score >= threshold"""
    if bbox_width <= 0 or bbox_height <= 0:
        raise ConfigurationError("bounding box sides must be positive")
    k1, k2 = np.asarray(k1, dtype=np.float64), np.asarray(k2, dtype=np.float64)
    if k1.shape != k2.shape or k1.ndim != 2 or k1.shape[1] != 2:
        raise DimensionError(f"landmark sets must both be p x 2, got {k1.shape} and {k2.shape}")
    offsets = (k2 - np.asarray(shift, dtype=np.float64) - k1) / np.array([bbox_width, bbox_height])
    norms = np.linalg.norm(offsets, axis=1)
    worst = int(np.argmax(norms))
    score = float(norms[worst])
    keep = score < threshold
    if not keep:
        logger.warning("discarding landmarks: landmark %d disagrees by %.3f of the box", worst, score)
    return FilterDecision(keep=keep, score=score, worst=worst)
