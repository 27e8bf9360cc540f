"""
Assembly of the coarse and detail objectives into LossReports, and the swap-based
consistency losses.

The consistency losses accept any renderer exposing `render(code)` and
`render_detail(code, displacement)` whose results carry `image` (and `uv_mask`
for detail renders), plus `jaw_pose(code)`.
"""

import dataclasses

import torch
from torch import Tensor

from .coarse import coarse_regularizers, eye_closure_loss, identity_loss, landmark_loss, mask_area, photometric_loss
from .detail import detail_regularizer, idmrf_loss, symmetry_loss
from .extractor import FeatureExtractor
from .weights import LossReport, LossWeights, report_from


def coarse_report(
    *,
    weights: LossWeights,
    extractor: FeatureExtractor | None,
    image: Tensor | None,
    mask: Tensor | None,
    rendered: Tensor | None,
    target_landmarks: Tensor,
    projected_landmarks: Tensor,
    landmarks_3d: Tensor,
    eyelid_pairs,
    scale: Tensor,
    landmark_weights: Tensor | None,
    shape: Tensor,
    expression: Tensor,
    albedo: Tensor,
) -> LossReport:
    """L_coarse without the shape-consistency term; zero-weight terms are not evaluated"""
    terms: dict[str, Tensor] = {}
    normalized: dict[str, float] = {}
    if weights.landmark:
        terms["landmark"] = landmark_loss(target_landmarks, projected_landmarks, landmark_weights)
    if weights.eye:
        terms["eye"] = eye_closure_loss(target_landmarks, landmarks_3d, eyelid_pairs, scale)
    if weights.photometric:
        terms["photometric"] = photometric_loss(image, rendered, mask)
        normalized["photometric"] = float(terms["photometric"].detach()) / max(mask_area(mask), 1.0)
    if weights.identity:
        terms["identity"] = identity_loss(extractor, image, rendered)
    regularizers = coarse_regularizers(shape, expression, albedo)
    for name, value in regularizers.items():
        if getattr(weights, name):
            terms[name] = value
    return report_from(terms, weights, normalized)


def detail_report(
    *,
    weights: LossWeights,
    extractor: FeatureExtractor | None,
    image: Tensor,
    mask: Tensor,
    rendered: Tensor,
    displacement: Tensor,
    uv_mask: Tensor,
) -> LossReport:
    """L_detail: photometric detail, ID-MRF, symmetry and displacement regularizer"""
    terms: dict[str, Tensor] = {}
    normalized: dict[str, float] = {}
    if weights.photometric_detail:
        terms["photometric_detail"] = photometric_loss(image, rendered, mask)
        normalized["photometric_detail"] = float(terms["photometric_detail"].detach()) / max(mask_area(mask), 1.0)
    if weights.mrf:
        terms["mrf"] = idmrf_loss(extractor, image, rendered, mask)
    if weights.symmetry:
        terms["symmetry"] = symmetry_loss(displacement, uv_mask)
    if weights.detail_reg:
        terms["detail_reg"] = detail_regularizer(displacement)
    return report_from(terms, weights, normalized)


def shape_consistency_loss(
    renderer,
    code,
    other_shape: Tensor,
    image: Tensor,
    mask: Tensor,
    extractor: FeatureExtractor | None,
    weights: LossWeights = LossWeights(),
) -> Tensor:
    """Photometric and identity terms of image i re-rendered with another image's beta"""
    swapped = dataclasses.replace(code, shape=other_shape)
    rendered = renderer.render(swapped).image
    total = rendered.new_zeros(())
    if weights.photometric:
        total = total + weights.photometric * photometric_loss(image, rendered, mask)
    if weights.identity:
        total = total + weights.identity * identity_loss(extractor, image, rendered)
    return total


def detail_consistency_loss(
    renderer,
    code,
    other_detail: Tensor,
    decoder,
    image: Tensor,
    mask: Tensor,
    extractor: FeatureExtractor | None,
    weights: LossWeights = LossWeights(),
    coarse=None,
) -> Tensor:
    """L_detail of image i rendered with D = F_d(delta_j, psi_i, jaw_i)"""
    displacement = decoder(other_detail, code.expression, renderer.jaw_pose(code))
    result = renderer.render_detail(code, displacement, coarse=coarse)
    report = detail_report(
        weights=weights,
        extractor=extractor,
        image=image,
        mask=mask,
        rendered=result.image,
        displacement=displacement,
        uv_mask=result.uv_mask,
    )
    return report.total if report.terms else torch.zeros((), dtype=displacement.dtype)
