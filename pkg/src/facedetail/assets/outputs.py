import logging
from pathlib import Path
from typing import Any

from ..common.errors import AssetFormatError
from .formats import write_json

logger = logging.getLogger(__name__)

FORMATS = ("obj", "pfm", "png", "png16", "json", "csv")


def save_outputs(item: Any, path: str | Path, format: str | None = None) -> Path:
    """
    Write a mesh (obj), map (pfm / png / png16), code (json), loss report (json)
    or loss trace (csv); the format defaults to the path suffix.
    """
    path = Path(path)
    format = (format or path.suffix.lstrip(".")).lower()
    if format not in FORMATS:
        raise AssetFormatError(f"unknown output format {format!r}; choose from {FORMATS}")
    if format == "obj" and hasattr(item, "to_obj"):
        written = item.to_obj(path)
    elif format == "pfm" and hasattr(item, "to_pfm"):
        written = item.to_pfm(path)
    elif format in ("png", "png16") and hasattr(item, "to_png"):
        written = item.to_png(path, bits=16 if format == "png16" else 8)
    elif format == "json" and hasattr(item, "to_json"):
        written = item.to_json(path)
    elif format == "json" and hasattr(item, "values"):
        written = write_json(path, item.values())
    elif format == "csv" and hasattr(item, "to_csv"):
        written = item.to_csv(path)
    else:
        raise AssetFormatError(f"{type(item).__name__} cannot be written as {format}")
    logger.debug("wrote %s", written)
    return written
