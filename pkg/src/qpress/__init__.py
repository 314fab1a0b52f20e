"""qpress: adaptive JPEG quality selection for cloud vision backends.

A deep-Q agent picks, per image, the ladder quality that keeps the
backend's labels intact while shrinking uploads; a runtime controller
watches accuracy through occasional dual uploads and retrains in place
when the scenery drifts.
"""

__version__ = "0.1.0"

from .codec import (
    QUALITY_LADDER,
    REFERENCE_QUALITY,
    CompressedImage,
    compress,
    compression_ratio,
    load_raster,
    quality_at,
    quality_index,
)
from .features import BlockDctExtractor, ExtractorDescriptor, get_extractor
from .metrics import RewardParams, RollingWindow, accuracy, reward, update_p_est

__all__ = [
    "QUALITY_LADDER",
    "REFERENCE_QUALITY",
    "CompressedImage",
    "compress",
    "compression_ratio",
    "load_raster",
    "quality_at",
    "quality_index",
    "BlockDctExtractor",
    "ExtractorDescriptor",
    "get_extractor",
    "RewardParams",
    "RollingWindow",
    "accuracy",
    "reward",
    "update_p_est",
    "__version__",
]
