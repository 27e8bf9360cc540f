"""
Model asset container: a JSON manifest plus one raw little-endian tensor blob.

Two layouts share the manifest schema:

- directory: `<dir>/manifest.json` and `<dir>/tensors.bin`, one CRC32 per tensor
- single file (`*.fdm`): magic b"FDMODEL\\0" followed by length-prefixed chunks
  `tag (4 bytes) | length (u64) | payload | crc32 (u32)`, tags MANI and BLOB

Float tensors whose values are exactly representable in float32 are stored as
float32 and widened on load, so a save/load round trip is bit-identical.
"""

import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Any

import numpy as np
import torch

from ..appearance.albedo import AlbedoModel
from ..common.errors import AssetFormatError, ChecksumError, TruncatedBlobError, UnsupportedVersionError
from ..common.settings import Settings
from ..common.tensors import DTYPE
from ..model_core.head_model import ParametricHeadModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"FDMODEL\0"
MANIFEST_NAME = "manifest.json"
BLOB_NAME = "tensors.bin"
SINGLE_FILE_SUFFIX = ".fdm"
_CHUNK_HEADER = struct.Struct("<4sQ")
_CRC = struct.Struct("<I")

MODEL_TENSORS = (
    "template",
    "triangles",
    "shape_basis",
    "expression_basis",
    "pose_basis",
    "skinning_weights",
    "joint_regressor",
    "landmark_faces",
    "landmark_barycentric",
    "uv",
)
_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


def resolve_asset_path(path: str | Path) -> Path:
    """Relative paths that do not exist are looked up under FACEDETAIL_ASSET_DIR"""
    path = Path(path)
    asset_dir = Settings().get("asset_dir")
    if not path.exists() and not path.is_absolute() and asset_dir is not None:
        return Path(asset_dir) / path
    return path


#################
## ENCODING
#################
def _storage(tensor: torch.Tensor) -> np.ndarray:
    array = tensor.detach().cpu().numpy()
    if np.issubdtype(array.dtype, np.integer):
        return array.astype("<i8")
    narrow = array.astype(np.float32)
    if np.array_equal(narrow.astype(np.float64), array.astype(np.float64)):
        return narrow.astype("<f4")
    return array.astype("<f8")


def _dtype_name(array: np.ndarray) -> str:
    return {"f4": "float32", "f8": "float64", "i8": "int64"}[array.dtype.str[1:]]


def encode(model: ParametricHeadModel, albedo_model: AlbedoModel) -> tuple[dict[str, Any], bytes]:
    tensors = {name: getattr(model, name) for name in MODEL_TENSORS}
    tensors["albedo_mean"] = albedo_model.mean
    tensors["albedo_basis"] = albedo_model.basis
    directory: dict[str, Any] = {}
    blobs, offset = [], 0
    for name, tensor in tensors.items():
        stored = np.ascontiguousarray(_storage(tensor))
        data = stored.tobytes()
        directory[name] = {
            "dtype": _dtype_name(stored),
            "shape": list(tensor.shape),
            "offset": offset,
            "length": len(data),
            "endianness": "little",
            "crc32": zlib.crc32(data),
        }
        blobs.append(data)
        offset += len(data)
    manifest = {
        "format_version": FORMAT_VERSION,
        "metadata": {
            "n_vertices": model.n_vertices,
            "n_triangles": model.n_triangles,
            "n_articulated": model.n_articulated,
            "n_shape": model.n_shape,
            "n_expression": model.n_expression,
            "n_albedo": albedo_model.n_albedo,
            "uv_size": albedo_model.size,
            "joint_names": list(model.joint_names),
            "parents": list(model.parents),
            "eyelid_pairs": [list(pair) for pair in model.eyelid_pairs],
            "landmark_table": "landmark_faces",
        },
        "tensors": directory,
    }
    return manifest, b"".join(blobs)


def decode(manifest: dict[str, Any], blob: bytes) -> tuple[ParametricHeadModel, AlbedoModel]:
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"asset format version {version!r} is not supported (expected {FORMAT_VERSION})")
    try:
        directory, meta = manifest["tensors"], manifest["metadata"]
    except KeyError as exc:
        raise AssetFormatError(f"manifest is missing {exc.args[0]!r}") from exc
    tensors = {}
    for name in (*MODEL_TENSORS, "albedo_mean", "albedo_basis"):
        if name not in directory:
            raise AssetFormatError(f"manifest lists no tensor {name!r}")
        tensors[name] = _read_tensor(name, directory[name], blob)
    model = ParametricHeadModel(
        **{name: tensors[name] for name in MODEL_TENSORS},
        parents=tuple(int(p) for p in meta["parents"]),
        joint_names=tuple(str(n) for n in meta["joint_names"]),
        eyelid_pairs=tuple((int(a), int(b)) for a, b in meta["eyelid_pairs"]),
    )
    return model, AlbedoModel(tensors["albedo_mean"], tensors["albedo_basis"])


def _read_tensor(name: str, entry: dict[str, Any], blob: bytes) -> torch.Tensor:
    try:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(int(s) for s in entry["shape"])
        offset, length = int(entry["offset"]), int(entry["length"])
    except KeyError as exc:
        raise AssetFormatError(f"tensor {name!r} has an invalid directory entry") from exc
    if length != dtype.itemsize * int(np.prod(shape, dtype=np.int64)):
        raise AssetFormatError(f"tensor {name!r}: declared length {length} does not match {entry['dtype']}{list(shape)}")
    if offset + length > len(blob):
        raise TruncatedBlobError(f"tensor {name!r} ends at byte {offset + length}, blob holds {len(blob)}")
    data = blob[offset : offset + length]
    if "crc32" in entry and zlib.crc32(data) != int(entry["crc32"]):
        raise ChecksumError(f"tensor {name!r} failed its CRC32 check")
    array = np.frombuffer(data, dtype=dtype).reshape(shape)
    if dtype.kind == "i":
        return torch.from_numpy(array.astype(np.int64))
    return torch.from_numpy(array.astype(np.float64)).to(DTYPE)


#################
## LAYOUTS
#################
def _write_chunk(handle, tag: bytes, payload: bytes) -> None:
    handle.write(_CHUNK_HEADER.pack(tag, len(payload)))
    handle.write(payload)
    handle.write(_CRC.pack(zlib.crc32(payload)))


def _read_chunks(raw: bytes, path: Path) -> dict[bytes, bytes]:
    if not raw.startswith(MAGIC):
        raise AssetFormatError(f"{path} is not a model container")
    chunks, position = {}, len(MAGIC)
    while position < len(raw):
        if position + _CHUNK_HEADER.size > len(raw):
            raise TruncatedBlobError(f"{path}: chunk header cut off at byte {position}")
        tag, length = _CHUNK_HEADER.unpack_from(raw, position)
        start = position + _CHUNK_HEADER.size
        end = start + length
        if end + _CRC.size > len(raw):
            raise TruncatedBlobError(f"{path}: chunk {tag!r} declares {length} bytes, file is shorter")
        payload = raw[start:end]
        (crc,) = _CRC.unpack_from(raw, end)
        if zlib.crc32(payload) != crc:
            raise ChecksumError(f"{path}: chunk {tag!r} failed its CRC32 check")
        chunks[tag] = payload
        position = end + _CRC.size
    return chunks


def save_model(path: str | Path, model: ParametricHeadModel, albedo_model: AlbedoModel) -> Path:
    """Directory layout unless `path` ends in .fdm"""
    path = Path(path)
    manifest, blob = encode(model, albedo_model)
    manifest_bytes = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8")
    if path.suffix == SINGLE_FILE_SUFFIX:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as handle:
            handle.write(MAGIC)
            _write_chunk(handle, b"MANI", manifest_bytes)
            _write_chunk(handle, b"BLOB", blob)
    else:
        path.mkdir(parents=True, exist_ok=True)
        (path / MANIFEST_NAME).write_bytes(manifest_bytes)
        (path / BLOB_NAME).write_bytes(blob)
    logger.info("saved model (%d vertices, %d bytes of tensors) to %s", model.n_vertices, len(blob), path)
    return path


def load_model(path: str | Path) -> tuple[ParametricHeadModel, AlbedoModel]:
    """Read either layout; every model invariant is checked on construction"""
    path = resolve_asset_path(path)
    if path.is_dir():
        manifest_path = path / MANIFEST_NAME
        if not manifest_path.is_file() or not (path / BLOB_NAME).is_file():
            raise AssetFormatError(f"{path} lacks {MANIFEST_NAME} or {BLOB_NAME}")
        manifest_bytes, blob = manifest_path.read_bytes(), (path / BLOB_NAME).read_bytes()
    elif path.is_file():
        chunks = _read_chunks(path.read_bytes(), path)
        if b"MANI" not in chunks or b"BLOB" not in chunks:
            raise AssetFormatError(f"{path} lacks a manifest or tensor chunk")
        manifest_bytes, blob = chunks[b"MANI"], chunks[b"BLOB"]
    else:
        raise AssetFormatError(f"{path} does not exist")
    try:
        manifest = json.loads(manifest_bytes)
    except json.JSONDecodeError as exc:
        raise AssetFormatError(f"{path}: manifest is not valid JSON") from exc
    model, albedo_model = decode(manifest, blob)
    logger.debug("loaded model from %s", path)
    return model, albedo_model
