from .container import FORMAT_VERSION, load_model, resolve_asset_path, save_model
from .formats import (
    read_csv,
    read_json,
    read_landmarks,
    read_obj,
    read_pfm,
    read_png,
    write_csv,
    write_json,
    write_landmarks,
    write_obj,
    write_pfm,
    write_png,
)
from .outputs import FORMATS, save_outputs

__all__ = [
    "FORMATS",
    "FORMAT_VERSION",
    "load_model",
    "read_csv",
    "read_json",
    "read_landmarks",
    "read_obj",
    "read_pfm",
    "read_png",
    "resolve_asset_path",
    "save_model",
    "save_outputs",
    "write_csv",
    "write_json",
    "write_landmarks",
    "write_obj",
    "write_pfm",
    "write_png",
]
