"""Content features used as the agent's observation of an image.

The default extractor works on a 64x64 luminance thumbnail and emits a
99-dim vector: 64 block-DCT band magnitudes in zigzag order, a 32-bin
luminance histogram, plus mean, variance, and Sobel edge density. It is
deterministic and runs on the image as received, before any re-encode.
"""

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image

from .exceptions import ConfigError

THUMB_SIDE = 64
BLOCK = 8
HIST_BINS = 32
EDGE_THRESHOLD = 0.25


@dataclass(frozen=True)
class ExtractorDescriptor:
    """Identity of a feature extractor; checkpoints embed it verbatim."""

    name: str
    dim: int
    version: int


@runtime_checkable
class FeatureExtractor(Protocol):
    descriptor: ExtractorDescriptor

    def extract(self, image: Image.Image) -> np.ndarray: ...


def _dct_matrix(size: int) -> np.ndarray:
    # Orthonormal DCT-II basis; D @ block @ D.T is the 2-D transform.
    n = np.arange(size)
    k = n[:, None]
    mat = np.cos(np.pi * (2.0 * n[None, :] + 1.0) * k / (2.0 * size))
    mat *= np.sqrt(2.0 / size)
    mat[0] /= np.sqrt(2.0)
    return mat


def _zigzag_order(size: int) -> np.ndarray:
    order = []
    for s in range(2 * size - 1):
        diag = [(i, s - i) for i in range(size) if 0 <= s - i < size]
        if s % 2 == 0:
            diag.reverse()
        order.extend(diag)
    rows = np.array([r for r, _ in order])
    cols = np.array([c for _, c in order])
    return rows * size + cols


_DCT8 = _dct_matrix(BLOCK)
_ZIGZAG = _zigzag_order(BLOCK)


def _sobel_magnitude(gray: np.ndarray) -> np.ndarray:
    # Valid-region response; border pixels carry no gradient sample.
    gx = (
        gray[:-2, 2:] + 2.0 * gray[1:-1, 2:] + gray[2:, 2:]
        - gray[:-2, :-2] - 2.0 * gray[1:-1, :-2] - gray[2:, :-2]
    )
    gy = (
        gray[2:, :-2] + 2.0 * gray[2:, 1:-1] + gray[2:, 2:]
        - gray[:-2, :-2] - 2.0 * gray[:-2, 1:-1] - gray[:-2, 2:]
    )
    return np.hypot(gx, gy)


class BlockDctExtractor:
    """Default extractor: block-DCT spectrum + histogram + edge stats."""

    descriptor = ExtractorDescriptor(
        name="block-dct-hist", dim=BLOCK * BLOCK + HIST_BINS + 3, version=1
    )

    def extract(self, image: Image.Image) -> np.ndarray:
        thumb = image.convert("L").resize((THUMB_SIDE, THUMB_SIDE), Image.BILINEAR)
        pixels = np.asarray(thumb, dtype=np.uint8)
        gray = pixels.astype(np.float64) / 255.0

        blocks_per_side = THUMB_SIDE // BLOCK
        blocks = (
            (gray - 0.5)
            .reshape(blocks_per_side, BLOCK, blocks_per_side, BLOCK)
            .transpose(0, 2, 1, 3)
            .reshape(-1, BLOCK, BLOCK)
        )
        coefs = _DCT8[None, :, :] @ blocks @ _DCT8.T[None, :, :]
        band_means = np.abs(coefs).mean(axis=0).reshape(-1)[_ZIGZAG]

        # 8 gray levels per bin; counts over 4096 pixels sum to exactly 1.
        hist = np.bincount(pixels.reshape(-1) >> 3, minlength=HIST_BINS).astype(
            np.float64
        ) / pixels.size

        mag = _sobel_magnitude(gray)
        stats = np.array(
            [gray.mean(), gray.var(), float(np.mean(mag > EDGE_THRESHOLD))]
        )

        vec = np.concatenate([band_means, hist, stats])
        if not np.all(np.isfinite(vec)):
            raise ValueError("non-finite feature value")
        return vec


_EXTRACTORS: dict[str, type] = {
    BlockDctExtractor.descriptor.name: BlockDctExtractor,
}


def get_extractor(name: str) -> FeatureExtractor:
    """Instantiate a registered extractor by name."""
    try:
        return _EXTRACTORS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown extractor {name!r}; registered: {sorted(_EXTRACTORS)}"
        ) from None


def register_extractor(cls: type) -> type:
    """Register a FeatureExtractor implementation under its descriptor name."""
    _EXTRACTORS[cls.descriptor.name] = cls
    return cls
