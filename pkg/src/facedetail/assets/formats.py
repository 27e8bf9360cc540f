"""
Plain file formats used for inputs and outputs.

- OBJ with per-vertex UVs (`f a/a b/b c/c`), floats written with 17 significant digits
- PFM (little-endian float32, rows stored bottom-up)
- PNG through Pillow, 8-bit RGB/gray or 16-bit gray (`I;16`), mapped from a value range
- JSON with full float precision, CSV, and plain-text landmark files (one "x y" per line)

Every writer creates missing parent directories and returns the written path.
"""

import csv
import json
import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from ..common.errors import AssetFormatError
from ..common.tensors import to_numpy

logger = logging.getLogger(__name__)


def _target(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _source(path: str | Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise AssetFormatError(f"{path} does not exist")
    return path


#################
## OBJ
#################
def write_obj(path: str | Path, vertices, triangles, uv=None) -> Path:
    path = _target(path)
    vertices, triangles = to_numpy(vertices), to_numpy(triangles).astype(np.int64) + 1
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in vertices.tolist()]
    if uv is not None:
        lines += [f"vt {u:.17g} {v:.17g}" for u, v in to_numpy(uv).tolist()]
        lines += [f"f {a}/{a} {b}/{b} {c}/{c}" for a, b, c in triangles.tolist()]
    else:
        lines += [f"f {a} {b} {c}" for a, b, c in triangles.tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_obj(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Vertices, triangles (0-based) and per-vertex UVs when present; polygons are fanned"""
    vertices, uv, triangles = [], [], []
    for number, line in enumerate(_source(path).read_text().splitlines(), start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        try:
            if tokens[0] == "v":
                vertices.append([float(x) for x in tokens[1:4]])
            elif tokens[0] == "vt":
                uv.append([float(x) for x in tokens[1:3]])
            elif tokens[0] == "f":
                ids = [int(token.split("/")[0]) for token in tokens[1:]]
                ids = [i - 1 if i > 0 else len(vertices) + i for i in ids]
                triangles += [[ids[0], ids[i], ids[i + 1]] for i in range(1, len(ids) - 1)]
        except ValueError as exc:
            raise AssetFormatError(f"{path}:{number}: cannot parse {line!r}") from exc
    uv_array = np.asarray(uv, dtype=np.float64) if len(uv) == len(vertices) and uv else None
    return (
        np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
        uv_array,
    )


#################
## PFM
#################
def write_pfm(path: str | Path, data) -> Path:
    path = _target(path)
    data = np.asarray(to_numpy(data), dtype=np.float32)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    if data.ndim == 2:
        header = "Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = "PF"
    else:
        raise AssetFormatError(f"PFM holds 1 or 3 channels, got shape {data.shape}")
    height, width = data.shape[:2]
    with path.open("wb") as handle:
        handle.write(f"{header}\n{width} {height}\n-1.0\n".encode("ascii"))
        handle.write(np.flipud(data).astype("<f4").tobytes())
    return path


def read_pfm(path: str | Path) -> np.ndarray:
    raw = _source(path).read_bytes()
    try:
        header, dims, scale, payload = raw.split(b"\n", 3)
        channels = {b"PF": 3, b"Pf": 1}[header.strip()]
        width, height = (int(v) for v in dims.split())
        endian = "<" if float(scale) < 0 else ">"
    except (ValueError, KeyError) as exc:
        raise AssetFormatError(f"{path} is not a PFM file") from exc
    count = width * height * channels
    if len(payload) < 4 * count:
        raise AssetFormatError(f"{path} is truncated")
    data = np.frombuffer(payload[: 4 * count], dtype=f"{endian}f4").reshape(height, width, channels)
    data = np.flipud(data).astype(np.float32)
    return data[..., 0] if channels == 1 else data


#################
## PNG
#################
def write_png(path: str | Path, data, bits: int = 8, value_range=(0.0, 1.0)) -> Path:
    """Map value_range linearly onto the full integer range, clamping outside it"""
    path = _target(path)
    lo, hi = (float(v) for v in value_range)
    if hi <= lo:
        raise AssetFormatError(f"empty PNG value range {value_range}")
    data = np.asarray(to_numpy(data), dtype=np.float64)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    if not (data.ndim == 2 or (data.ndim == 3 and data.shape[2] == 3)):
        raise AssetFormatError(f"PNG export takes gray or RGB images, got shape {data.shape}")
    scaled = np.clip((data - lo) / (hi - lo), 0.0, 1.0)
    if bits == 8:
        image = Image.fromarray(np.round(scaled * 255.0).astype(np.uint8))
    elif bits == 16:
        if data.ndim != 2:
            raise AssetFormatError("16-bit PNG export is single-channel only")
        image = Image.fromarray(np.round(scaled * 65535.0).astype(np.uint16))
    else:
        raise AssetFormatError(f"PNG bit depth must be 8 or 16, got {bits}")
    image.save(path, format="PNG")
    return path


def read_png(path: str | Path, value_range=(0.0, 1.0)) -> np.ndarray:
    """Inverse of write_png: gray images come back (H, W), colour images (H, W, 3)"""
    try:
        image = Image.open(_source(path))
        image.load()
    except OSError as exc:
        raise AssetFormatError(f"{path} is not a readable PNG") from exc
    if image.mode in ("I;16", "I;16B", "I"):
        data = np.asarray(image, dtype=np.float64) / 65535.0
    else:
        if image.mode not in ("L", "RGB"):
            image = image.convert("RGB" if image.mode in ("RGBA", "P", "CMYK") else "L")
        data = np.asarray(image, dtype=np.float64) / 255.0
    lo, hi = (float(v) for v in value_range)
    return lo + data * (hi - lo)


#################
## JSON / CSV / LANDMARKS
#################
def write_json(path: str | Path, obj: Any) -> Path:
    path = _target(path)
    # json writes floats with repr, which round-trips every double exactly
    path.write_text(json.dumps(obj, indent=2, allow_nan=False))
    return path


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(_source(path).read_text())
    except json.JSONDecodeError as exc:
        raise AssetFormatError(f"{path} is not valid JSON: {exc}") from exc


def write_csv(path: str | Path, header: list[str], rows: Iterable[Iterable[Any]]) -> Path:
    path = _target(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with _source(path).open(newline="") as handle:
        return list(csv.DictReader(handle))


def write_landmarks(path: str | Path, points) -> Path:
    path = _target(path)
    points = to_numpy(points)
    path.write_text("\n".join(" ".join(f"{v:.17g}" for v in row) for row in points.tolist()) + "\n")
    return path


def read_landmarks(path: str | Path, columns: int | None = None) -> np.ndarray:
    """Whitespace or comma separated rows; `columns` checks the width (2 for image, 3 for scan)"""
    rows = []
    for number, line in enumerate(_source(path).read_text().splitlines(), start=1):
        line = line.split("#")[0].replace(",", " ").strip()
        if not line:
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError as exc:
            raise AssetFormatError(f"{path}:{number}: cannot parse {line!r}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise AssetFormatError(f"{path} has no landmarks or ragged rows")
    points = np.asarray(rows, dtype=np.float64)
    if columns is not None and points.shape[1] != columns:
        raise AssetFormatError(f"{path} has {points.shape[1]} columns, expected {columns}")
    return points
