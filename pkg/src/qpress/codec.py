"""JPEG transcoding at a fixed ladder of quality levels.

All encodes pin the same settings (baseline, 4:2:0 chroma subsampling, no
optimizer passes) so byte sizes for one source are comparable across
qualities and reproducible within a build.
"""

import io
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .exceptions import (
    InvalidImageError,
    MismatchedSourceError,
    UnsupportedQualityError,
    ZeroReferenceError,
)

QUALITY_LADDER = (5, 15, 25, 35, 45, 55, 65, 75, 85, 95)
REFERENCE_QUALITY = 75

_JPEG_ARGS = {
    "format": "JPEG",
    "subsampling": 2,
    "progressive": False,
    "optimize": False,
}


@dataclass(frozen=True)
class CompressedImage:
    """One encode of one source image at one ladder quality."""

    payload: bytes
    quality: int
    source_id: str

    @property
    def size_bytes(self) -> int:
        return len(self.payload)


def validate_quality(quality: int) -> int:
    if quality not in QUALITY_LADDER:
        raise UnsupportedQualityError(
            f"quality {quality!r} not on ladder {QUALITY_LADDER}"
        )
    return quality


def quality_index(quality: int) -> int:
    """Ladder position of a quality value (0..9)."""
    validate_quality(quality)
    return (quality - 5) // 10


def quality_at(index: int) -> int:
    """Quality value at a ladder position (inverse of quality_index)."""
    if not 0 <= index < len(QUALITY_LADDER):
        raise UnsupportedQualityError(f"ladder index {index!r} out of range")
    return QUALITY_LADDER[index]


def _normalize_mode(image: Image.Image) -> Image.Image:
    # JPEG holds no alpha or palette; everything exotic becomes RGB.
    if image.mode in ("RGB", "L"):
        return image
    return image.convert("RGB")


def load_raster(path: str | Path) -> Image.Image:
    """Decode a PNG or JPEG file into an RGB or grayscale raster.

    Raises InvalidImageError when the file does not decode.
    """
    try:
        with Image.open(path) as img:
            img.load()
            raster = _normalize_mode(img)
            if raster is img:
                raster = img.copy()
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise InvalidImageError(f"cannot decode {path}: {exc}") from exc
    return raster


def compress(image: Image.Image, quality: int, source_id: str = "") -> CompressedImage:
    """Encode a raster as JPEG at a ladder quality.

    The encode is deterministic: one (image, quality) pair always yields
    identical bytes within a build.
    """
    validate_quality(quality)
    if image.width <= 0 or image.height <= 0:
        raise InvalidImageError(f"zero-size image {image.size}")
    buf = io.BytesIO()
    try:
        _normalize_mode(image).save(buf, quality=quality, **_JPEG_ARGS)
    except Exception as exc:
        raise InvalidImageError(f"encode failed: {exc}") from exc
    return CompressedImage(payload=buf.getvalue(), quality=quality, source_id=source_id)


def compression_ratio(compressed: CompressedImage, reference: CompressedImage) -> float:
    """Byte-size ratio of a compressed variant to its reference encode.

    Exact ratio of recorded byte counts; values above 1.0 are legitimate
    (high-quality re-encodes can outgrow the reference) and are never
    clamped.
    """
    if compressed.source_id != reference.source_id:
        raise MismatchedSourceError(
            f"ratio across sources {compressed.source_id!r} vs {reference.source_id!r}"
        )
    if reference.size_bytes == 0:
        raise ZeroReferenceError("reference payload is empty")
    return compressed.size_bytes / reference.size_bytes
