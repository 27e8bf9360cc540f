"""
Stateless mixins shared by the data types.

- They only read attributes of the host class (no __init__, no own state).
- File-format work is delegated to facedetail.assets.formats, imported lazily to keep
  the core packages free of I/O imports.
"""

import dataclasses
from pathlib import Path

import numpy as np
from torch import Tensor


class TensorFieldsMixin:
    """Dataclass helpers for hosts whose fields are tensors"""

    def tensor_fields(self) -> dict[str, Tensor]:
        return {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)  # type: ignore[arg-type]
            if isinstance(getattr(self, f.name), Tensor)
        }

    def to_numpy(self) -> dict[str, np.ndarray]:
        return {name: t.detach().cpu().numpy() for name, t in self.tensor_fields().items()}

    def detached(self):
        """Copy of the host with every tensor field detached from the graph"""
        return dataclasses.replace(
            self,  # type: ignore[arg-type]
            **{name: t.detach() for name, t in self.tensor_fields().items()},
        )


class ObjExportMixin:
    """Wavefront OBJ export for hosts with vertices, triangles and uv"""

    def to_obj(self, path: str | Path) -> Path:
        from ..assets.formats import write_obj

        return write_obj(path, self.vertices, self.triangles, self.uv)  # type: ignore[attr-defined]


class MapExportMixin:
    """PFM / PNG export for hosts with a `data` map and an optional `png_range`"""

    def to_pfm(self, path: str | Path) -> Path:
        from ..assets.formats import write_pfm

        return write_pfm(path, self.data)  # type: ignore[attr-defined]

    def to_png(self, path: str | Path, bits: int = 8) -> Path:
        from ..assets.formats import write_png

        value_range = getattr(self, "png_range", (0.0, 1.0))
        return write_png(path, self.data, bits=bits, value_range=value_range)  # type: ignore[attr-defined]


class JsonCodeMixin:
    """Lossless JSON round trip for hosts exposing to_dict / from_dict"""

    def to_json(self, path: str | Path) -> Path:
        from ..assets.formats import write_json

        return write_json(path, self.to_dict())  # type: ignore[attr-defined]

    @classmethod
    def from_json(cls, path: str | Path):
        from ..assets.formats import read_json

        return cls.from_dict(read_json(path))  # type: ignore[attr-defined]
