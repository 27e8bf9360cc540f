from .decoder import (
    DISPLACEMENT_SCALE,
    DecoderSpec,
    DetailDecoder,
    DisplacementMap,
    decode_displacement,
    load_decoder,
    save_decoder,
)
from .displacement import (
    apply_displacement,
    detail_mesh,
    detail_normals,
    finite_difference_normals,
    transfer_detail_normals,
)
from .rendering import render_detail

__all__ = [
    "DISPLACEMENT_SCALE",
    "DecoderSpec",
    "DetailDecoder",
    "DisplacementMap",
    "apply_displacement",
    "decode_displacement",
    "detail_mesh",
    "detail_normals",
    "finite_difference_normals",
    "load_decoder",
    "render_detail",
    "save_decoder",
    "transfer_detail_normals",
]
