"""
Subjects and their images: the unit of multi-image fitting and decoder training.

A subjects file is JSON; paths are relative to the file:

    {"subjects": [{"id": "s01", "images": [
        {"image": "s01/a.png", "landmarks": "s01/a.txt", "mask": "s01/a_mask.png",
         "code": "s01/a.json"}]}]}
"""

from dataclasses import dataclass
from pathlib import Path

import torch
from torch import Tensor

from ..assets.formats import read_json, read_landmarks, read_png
from ..common.errors import ConfigurationError
from .code import LatentCode


@dataclass(frozen=True, eq=False)
class SubjectImage:
    image: Tensor  # (H, W, 3) in [0, 1]
    landmarks: Tensor  # (68, 2) image coordinates
    mask: Tensor  # (H, W) bool skin mask
    code: LatentCode | None = None
    displacement: Tensor | None = None
    name: str = ""


@dataclass(frozen=True, eq=False)
class SubjectSet:
    subject_id: str
    images: tuple[SubjectImage, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        if not self.images:
            raise ConfigurationError(f"subject {self.subject_id!r} has no images")

    def __len__(self) -> int:
        return len(self.images)


def _field(entry: dict, name: str, where: str):
    if name not in entry:
        raise ConfigurationError(f"{where} is missing {name!r}")
    value = entry[name]
    if not isinstance(value, str):
        raise ConfigurationError(f"{where}: {name!r} must be a string, got {type(value).__name__}")
    return value


def _load_image(entry: dict, root: Path, where: str) -> SubjectImage:
    if not isinstance(entry, dict):
        raise ConfigurationError(f"{where} must be an object, got {type(entry).__name__}")
    name = _field(entry, "image", where)
    image = torch.from_numpy(read_png(root / name)).to(torch.float64)
    landmarks = torch.from_numpy(read_landmarks(root / _field(entry, "landmarks", where)))
    if "mask" in entry:
        mask_data = read_png(root / _field(entry, "mask", where))
        mask = torch.from_numpy(mask_data.reshape(mask_data.shape[0], mask_data.shape[1], -1)[..., 0] > 0.5)
    else:
        mask = torch.ones(image.shape[:2], dtype=torch.bool)
    if image.ndim == 2:
        image = image[..., None].expand(-1, -1, 3)
    code = LatentCode.from_json(root / _field(entry, "code", where)) if "code" in entry else None
    return SubjectImage(image=image[..., :3], landmarks=landmarks, mask=mask, code=code, name=name)


def load_subject_sets(path: str | Path) -> list[SubjectSet]:
    path = Path(path)
    data = read_json(path)
    subjects = data.get("subjects") if isinstance(data, dict) else None
    if not subjects or not isinstance(subjects, list):
        raise ConfigurationError(f"{path} lists no subjects")
    sets = []
    for s, entry in enumerate(subjects):
        where = f"{path}: subject {s}"
        if not isinstance(entry, dict):
            raise ConfigurationError(f"{where} must be an object, got {type(entry).__name__}")
        if "id" not in entry:
            raise ConfigurationError(f"{where} is missing 'id'")
        images = entry.get("images", [])
        if not isinstance(images, list):
            raise ConfigurationError(f"{where}: 'images' must be a list")
        loaded = tuple(_load_image(image, path.parent, f"{where} image {i}") for i, image in enumerate(images))
        sets.append(SubjectSet(str(entry["id"]), loaded))
    return sets
