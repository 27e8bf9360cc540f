from .errors import (
    AssetError,
    AssetFormatError,
    ChecksumError,
    ConfigurationError,
    DegenerateConfigurationError,
    DegenerateNormalError,
    DimensionError,
    EmptyMeshError,
    FaceDetailError,
    FittingDivergedError,
    LandmarkIndexError,
    ModelInvariantError,
    NonUnitNormalError,
    ShapeMismatchError,
    SkinningWeightsError,
    TruncatedBlobError,
    UnsupportedVersionError,
    ZeroEmbeddingError,
)
from .log import configure_logging
from .settings import Settings
from .singleton import ThreadSafeSingletonMeta

__all__ = [
    "AssetError",
    "AssetFormatError",
    "ChecksumError",
    "ConfigurationError",
    "DegenerateConfigurationError",
    "DegenerateNormalError",
    "DimensionError",
    "EmptyMeshError",
    "FaceDetailError",
    "FittingDivergedError",
    "LandmarkIndexError",
    "ModelInvariantError",
    "NonUnitNormalError",
    "ShapeMismatchError",
    "SkinningWeightsError",
    "TruncatedBlobError",
    "UnsupportedVersionError",
    "ZeroEmbeddingError",
    "configure_logging",
    "Settings",
    "ThreadSafeSingletonMeta",
]
