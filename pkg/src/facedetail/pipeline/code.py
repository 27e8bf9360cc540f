from dataclasses import dataclass, fields, replace
from typing import Any

import torch
from torch import Tensor

from ..appearance.camera import Camera
from ..appearance.sh import Lighting
from ..common.errors import ConfigurationError, DimensionError
from ..common.mixins import JsonCodeMixin, TensorFieldsMixin
from ..common.tensors import DTYPE, as_float
from ..model_core.head_model import ParametricHeadModel

DETAIL_DIM = 128
LIGHT_DIM = 27

_VECTOR_FIELDS = ("shape", "pose", "expression", "albedo", "light", "translation", "detail")


@dataclass(frozen=True, eq=False)
class LatentCode(JsonCodeMixin, TensorFieldsMixin):
    """
    Per-image parameters: beta, theta, psi, alpha, SH light (9 x 3, row-major),
    camera scale and translation, and the detail code delta.

    `jaw` is the joint index of the jaw in theta, carried so codes can be
    retargeted without the model at hand.
    """

    shape: Tensor
    pose: Tensor
    expression: Tensor
    albedo: Tensor
    light: Tensor
    scale: Tensor
    translation: Tensor
    detail: Tensor
    jaw: int = 2

    def __post_init__(self) -> None:
        for name in _VECTOR_FIELDS:
            object.__setattr__(self, name, as_float(getattr(self, name)).reshape(-1))
        object.__setattr__(self, "scale", as_float(self.scale).reshape(()))
        if self.light.shape[0] != LIGHT_DIM:
            raise DimensionError(f"light must have {LIGHT_DIM} entries, got {self.light.shape[0]}")
        if self.translation.shape[0] != 2:
            raise DimensionError("translation must have 2 entries")
        if self.pose.shape[0] % 3:
            raise DimensionError("pose must hold 3 entries per joint")
        if not bool(self.scale.detach() > 0):
            raise ConfigurationError(f"camera scale must be positive, got {float(self.scale.detach())}")

    #################
    ## CONSTRUCTION
    #################
    @classmethod
    def zeros(
        cls,
        model: ParametricHeadModel,
        n_albedo: int,
        n_detail: int = DETAIL_DIM,
        scale: float = 1.0,
        translation=(0.0, 0.0),
    ) -> "LatentCode":
        return cls(
            shape=torch.zeros(model.n_shape, dtype=DTYPE),
            pose=torch.zeros(model.n_pose, dtype=DTYPE),
            expression=torch.zeros(model.n_expression, dtype=DTYPE),
            albedo=torch.zeros(n_albedo, dtype=DTYPE),
            light=Lighting.ambient(1.0).coefficients.reshape(-1),
            scale=torch.tensor(float(scale), dtype=DTYPE),
            translation=as_float(translation),
            detail=torch.zeros(n_detail, dtype=DTYPE),
            jaw=model.jaw_index if "jaw" in model.joint_names else 0,
        )

    def replace(self, **changes: Any) -> "LatentCode":
        return replace(self, **changes)

    def clone(self) -> "LatentCode":
        return replace(self, **{name: t.detach().clone() for name, t in self.tensor_fields().items()})

    #################
    ## VIEWS
    #################
    @property
    def jaw_slice(self) -> slice:
        return slice(3 * self.jaw, 3 * self.jaw + 3)

    @property
    def jaw_pose(self) -> Tensor:
        return self.pose[self.jaw_slice]

    @property
    def camera(self) -> Camera:
        return Camera(self.scale, self.translation)

    @property
    def lighting(self) -> Lighting:
        return Lighting(self.light.reshape(9, 3))

    def check(self, model: ParametricHeadModel, n_albedo: int | None = None) -> None:
        expected = {
            "shape": model.n_shape,
            "pose": model.n_pose,
            "expression": model.n_expression,
        }
        if n_albedo is not None:
            expected["albedo"] = n_albedo
        for name, size in expected.items():
            if getattr(self, name).shape[0] != size:
                raise DimensionError(f"{name} has {getattr(self, name).shape[0]} entries, model expects {size}")

    def coarse_dimension(self, free_joints: int = 2) -> int:
        """Size of the coarse code when only `free_joints` joints of theta are free"""
        return (
            self.shape.shape[0]
            + 3 * free_joints
            + self.expression.shape[0]
            + self.albedo.shape[0]
            + LIGHT_DIM
            + 3
        )

    def equals(self, other: "LatentCode") -> bool:
        """Bit-for-bit equality of every field"""
        return self.jaw == other.jaw and all(
            torch.equal(getattr(self, f.name), getattr(other, f.name))
            for f in fields(self)
            if f.name != "jaw"
        )

    #################
    ## SERIALIZATION
    #################
    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {name: getattr(self, name).detach().tolist() for name in _VECTOR_FIELDS}
        out["scale"] = float(self.scale.detach())
        out["jaw"] = self.jaw
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LatentCode":
        if not isinstance(data, dict):
            raise ConfigurationError(f"a code must be a JSON object, got {type(data).__name__}")
        try:
            values = {name: torch.tensor(data[name], dtype=DTYPE) for name in _VECTOR_FIELDS}
            values["scale"] = torch.tensor(float(data["scale"]), dtype=DTYPE)
            jaw = int(data.get("jaw", 2))
        except KeyError as exc:
            raise ConfigurationError(f"code is missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"code holds a non-numeric field: {exc}") from exc
        return cls(**values, jaw=jaw)
