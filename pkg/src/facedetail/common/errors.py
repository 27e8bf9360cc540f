"""
Exception hierarchy shared by every subpackage.

- Every error raised on purpose derives from FaceDetailError.
- Each class carries a stable `code` used by the CLI's machine-readable error output.
"""

from typing import Any


class FaceDetailError(Exception):
    """Base class for all errors raised by facedetail"""

    code = "facedetail_error"

    def to_dict(self) -> dict[str, Any]:
        return {"error": self.code, "type": type(self).__name__, "message": str(self)}


#################
## INPUT VALIDATION
#################
class DimensionError(FaceDetailError, ValueError):
    code = "dimension_mismatch"


class ShapeMismatchError(FaceDetailError, ValueError):
    code = "shape_mismatch"


class ConfigurationError(FaceDetailError, ValueError):
    code = "invalid_configuration"


class NonUnitNormalError(FaceDetailError, ValueError):
    code = "non_unit_normal"


#################
## MODEL AND GEOMETRY
#################
class ModelInvariantError(FaceDetailError, ValueError):
    code = "model_invariant_violated"


class SkinningWeightsError(ModelInvariantError):
    code = "skinning_weights_not_normalized"


class LandmarkIndexError(FaceDetailError, IndexError):
    code = "landmark_index_out_of_range"


class DegenerateNormalError(FaceDetailError, ValueError):
    code = "degenerate_normal"


class DegenerateConfigurationError(FaceDetailError, ValueError):
    code = "degenerate_configuration"


class EmptyMeshError(FaceDetailError, ValueError):
    code = "empty_mesh"


#################
## LOSSES AND OPTIMIZATION
#################
class ZeroEmbeddingError(FaceDetailError, ValueError):
    code = "zero_embedding"


class FittingDivergedError(FaceDetailError, RuntimeError):
    """Raised when a loss turns non-finite; keeps the last finite checkpoint"""

    code = "fitting_diverged"

    def __init__(self, message: str, trace: list[dict[str, float]], checkpoint: Any = None):
        super().__init__(message)
        self.trace = trace
        self.checkpoint = checkpoint


#################
## ASSETS
#################
class AssetError(FaceDetailError, IOError):
    code = "asset_error"


class UnsupportedVersionError(AssetError):
    code = "unsupported_version"


class ChecksumError(AssetError):
    code = "checksum_mismatch"


class TruncatedBlobError(AssetError):
    code = "truncated_blob"


class AssetFormatError(AssetError):
    code = "malformed_asset"
