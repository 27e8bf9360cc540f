"""
Expression retargeting: one capture's identity (shape, head pose, appearance,
camera, detail code) driven by another capture's expression and jaw pose.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import Tensor

from ..appearance.rendering import to_display
from ..common.errors import DimensionError
from ..detail.decoder import DetailDecoder, DisplacementMap, decode_displacement
from ..detail.displacement import detail_mesh
from ..model_core.mesh import Mesh
from .code import LatentCode
from .renderer import FaceRenderer

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RetargetResult:
    code: LatentCode
    displacement: DisplacementMap


@dataclass(frozen=True, eq=False)
class AnimationFrame:
    index: int
    code: LatentCode
    displacement: DisplacementMap
    image: Tensor  # (H, W, 3)
    mesh: Mesh  # detail mesh M'


def retarget_code(identity: LatentCode, expression: LatentCode) -> LatentCode:
    """Identity's code with psi and the jaw rotation taken from `expression`"""
    if identity.pose.shape != expression.pose.shape or identity.expression.shape != expression.expression.shape:
        raise DimensionError("retargeted codes must be bound to the same model")
    if identity.jaw != expression.jaw:
        raise DimensionError(f"jaw joints differ: {identity.jaw} vs {expression.jaw}")
    pose = identity.pose.clone()
    pose[identity.jaw_slice] = expression.jaw_pose
    return identity.replace(expression=expression.expression.clone(), pose=pose)


def retarget(identity: LatentCode, expression: LatentCode, decoder: DetailDecoder) -> RetargetResult:
    code = retarget_code(identity, expression)
    with torch.no_grad():
        displacement = decode_displacement(decoder, code.detail, code.expression, code.jaw_pose)
    return RetargetResult(code=code, displacement=displacement)


def animate_sequence(
    identity: LatentCode,
    expressions: list[LatentCode],
    decoder: DetailDecoder,
    renderer: FaceRenderer,
    out_dir: str | Path | None = None,
    export_obj: bool = False,
) -> list[AnimationFrame]:
    """
    Retarget and detail-render every expression code in order.

    With `out_dir` each frame is written as frame_XXXX.png (and frame_XXXX.obj when
    `export_obj` is set).
    """
    frames = []
    for index, expression in enumerate(expressions):
        result = retarget(identity, expression, decoder)
        with torch.no_grad():
            rendered = renderer.render_detail(result.code, result.displacement)
            mesh = detail_mesh(rendered.mesh, result.displacement.data, rendered.state.normals)
        frame = AnimationFrame(index, result.code, result.displacement, rendered.image, mesh)
        frames.append(frame)
        if out_dir is not None:
            _write_frame(Path(out_dir), frame, export_obj)
    logger.info("animated %d frames", len(frames))
    return frames


def _write_frame(out_dir: Path, frame: AnimationFrame, export_obj: bool) -> None:
    from ..assets.formats import write_png

    stem = f"frame_{frame.index:04d}"
    write_png(out_dir / f"{stem}.png", to_display(frame.image))
    if export_obj:
        frame.mesh.to_obj(out_dir / f"{stem}.obj")
