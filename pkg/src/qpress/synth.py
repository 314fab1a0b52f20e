"""Deterministic synthetic corpora with known per-image fragility.

Each generated image gets a fragility threshold q* drawn from a weighted
pool, and its texture is rendered as a function of that threshold: robust
images (low q*) carry dense high-frequency texture, fragile ones (high q*)
are smooth. Feature extractors can therefore predict q* from content,
which is what makes the corpora usable for end-to-end policy training.

Everything is seeded; the same arguments always produce byte-identical
PNGs, manifest, and oracle spec.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .codec import quality_index, validate_quality

DEFAULT_FRAGILITY_WEIGHTS = {5: 0.3, 15: 0.3, 25: 0.2, 35: 0.2}


@dataclass
class SynthCorpus:
    """Paths and ground truth for one generated corpus."""

    root: Path
    manifest_path: Path
    oracle_spec_path: Path
    image_dir: Path
    ids: list[str] = field(default_factory=list)
    labels: dict[str, str] = field(default_factory=dict)
    fragility: dict[str, int] = field(default_factory=dict)


def _texture_params(fragility: int) -> tuple[float, float, float, float]:
    # Images that tolerate harsher compression are rendered busier and
    # noisier than fragile ones, so byte size falls off with quality at a
    # tier-dependent rate. Each tier also gets its own carrier frequency,
    # which lands in its own block-DCT band, and its own swatch brightness,
    # which lands in its own luminance-histogram bin. The swatch acts like
    # a scene-type cue (sky, foliage, pavement): a high-margin feature the
    # policy can key the fragility tier off.
    tier = quality_index(fragility)
    amp = 0.46 - 0.04 * tier
    freq = 18.0 - 2.0 * tier
    noise_sd = 0.05 - 0.004 * tier
    swatch = 0.10 + 0.17 * tier
    return amp, freq, noise_sd, swatch


def render_image(
    rng: np.random.Generator, fragility: int, size: tuple[int, int] = (128, 128)
) -> Image.Image:
    """Render one RGB image whose texture encodes its fragility tier."""
    validate_quality(fragility)
    amp, freq, noise_sd, swatch = _texture_params(fragility)
    w, h = size
    yy, xx = np.mgrid[0:h, 0:w]
    xx = xx / w
    yy = yy / h

    phase_x = rng.uniform(0.0, 2.0 * np.pi)
    phase_y = rng.uniform(0.0, 2.0 * np.pi)
    ramp_dir = rng.uniform(0.0, 2.0 * np.pi)
    base = 0.5 + 0.14 * np.sin(
        2.0 * np.pi * (xx * np.cos(ramp_dir) + yy * np.sin(ramp_dir)) + phase_x
    )
    # Crossed axis-aligned carriers: the spectral line per tier survives any
    # phase draw, unlike a single randomly-oriented grating.
    tex = 0.5 * amp * (
        np.sin(2.0 * np.pi * freq * xx + phase_x)
        + np.sin(2.0 * np.pi * freq * yy + phase_y)
    )
    gray = np.clip(base + tex + noise_sd * rng.standard_normal((h, w)), 0.0, 1.0)
    # Flat swatch along the left edge, one brightness plateau per tier.
    gray[:, : w // 4] = np.clip(
        swatch + 0.01 * rng.standard_normal((h, w // 4)), 0.0, 1.0
    )

    chans = []
    for _ in range(3):
        gain = rng.uniform(0.97, 1.0)
        lift = rng.uniform(0.0, 0.02)
        chans.append(np.clip(gray * gain + lift, 0.0, 1.0))
    rgb = (np.stack(chans, axis=-1) * 255.0).round().astype(np.uint8)
    return Image.fromarray(rgb, "RGB")


def synthesize_corpus(
    out_dir: str | Path,
    count: int,
    seed: int,
    fragility_weights: dict[int, float] | None = None,
    noise: float = 0.0,
    scenery_id: str = "synth",
    size: tuple[int, int] = (128, 128),
    label_pool: int = 40,
) -> SynthCorpus:
    """Write images, a stream manifest, and a matching oracle spec.

    Layout under out_dir:
        images/<id>.png
        manifest.jsonl      one {"path", "scenery_id"} object per line
        oracle.json         {"labels", "fragility", "noise", "seed"}

    Source ids are the image basenames without extension, which is also
    how the stream reader derives them.
    """
    weights = dict(fragility_weights or DEFAULT_FRAGILITY_WEIGHTS)
    for q in weights:
        validate_quality(q)
    root = Path(out_dir)
    image_dir = root / "images"
    image_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    qualities = np.array(sorted(weights), dtype=np.int64)
    probs = np.array([weights[int(q)] for q in qualities], dtype=np.float64)
    probs = probs / probs.sum()
    pool = [f"object-{j:03d}" for j in range(label_pool)]

    corpus = SynthCorpus(
        root=root,
        manifest_path=root / "manifest.jsonl",
        oracle_spec_path=root / "oracle.json",
        image_dir=image_dir,
    )
    manifest_lines = []
    for i in range(count):
        q_star = int(rng.choice(qualities, p=probs))
        source_id = f"{scenery_id}-{i:05d}"
        img = render_image(rng, q_star, size=size)
        img.save(image_dir / f"{source_id}.png", format="PNG")
        corpus.ids.append(source_id)
        corpus.labels[source_id] = pool[int(rng.integers(len(pool)))]
        corpus.fragility[source_id] = q_star
        manifest_lines.append(
            json.dumps(
                {"path": f"images/{source_id}.png", "scenery_id": scenery_id},
                separators=(",", ":"),
            )
        )

    corpus.manifest_path.write_text("\n".join(manifest_lines) + "\n")
    spec = {
        "labels": corpus.labels,
        "fragility": corpus.fragility,
        "noise": noise,
        "seed": seed,
    }
    corpus.oracle_spec_path.write_text(json.dumps(spec, indent=2, sort_keys=True))
    return corpus
