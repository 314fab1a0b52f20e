"""Vision backends and the deterministic image stream.

A backend labels one compressed upload. The simulated oracle answers from
a ground-truth table with a per-image fragility threshold; the HTTP
adapter forwards bytes to a real labeling endpoint. `invoke` wraps either
kind, stamping metadata and recording upload accounting.
"""

import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
import requests
from PIL import Image

from .codec import CompressedImage, load_raster, validate_quality
from .exceptions import (
    BackendRejectedError,
    BackendTimeoutError,
    BackendUnavailableError,
    ConfigError,
)


@dataclass(frozen=True)
class PredictionResult:
    """Ordered labels for one upload, tagged with which variant produced it."""

    labels: tuple[str, ...]
    source_quality: int
    is_reference: bool = False


@runtime_checkable
class VisionBackend(Protocol):
    def predict(self, payload: CompressedImage) -> list[str]: ...


@dataclass
class InvocationStats:
    """Aggregate upload accounting across backend calls."""

    count: int = 0
    total_bytes: int = 0
    total_seconds: float = 0.0

    def record(self, size_bytes: int, seconds: float) -> None:
        self.count += 1
        self.total_bytes += size_bytes
        self.total_seconds += seconds

    @property
    def mean_bytes(self) -> float:
        return self.total_bytes / self.count if self.count else 0.0


def invoke(
    backend: VisionBackend,
    payload: CompressedImage,
    stats: InvocationStats | None = None,
    reference: bool = False,
) -> PredictionResult:
    """Submit one upload and wrap the backend's labels with metadata."""
    started = time.perf_counter()
    labels = backend.predict(payload)
    if stats is not None:
        stats.record(payload.size_bytes, time.perf_counter() - started)
    return PredictionResult(
        labels=tuple(labels), source_quality=payload.quality, is_reference=reference
    )


class SimulatedOracle:
    """Ground-truth backend: correct labels iff quality clears the threshold.

    Below its fragility threshold an image gets a deterministic wrong
    label; above it, the true label, optionally flipped to a random wrong
    one with probability `noise`. Reproducible from the seed given the
    same call sequence.
    """

    def __init__(
        self,
        labels: dict[str, str],
        fragility: dict[str, int],
        noise: float = 0.0,
        seed: int = 0,
    ):
        missing = set(labels) ^ set(fragility)
        if missing:
            raise ConfigError(f"labels/fragility id mismatch: {sorted(missing)[:5]}")
        for q in fragility.values():
            validate_quality(q)
        if not 0.0 <= noise <= 1.0:
            raise ConfigError(f"noise {noise} outside [0, 1]")
        self._labels = dict(labels)
        self._fragility = {k: int(v) for k, v in fragility.items()}
        self.noise = float(noise)
        self._rng = np.random.default_rng(seed)
        self._pool = sorted(set(self._labels.values()))

    @classmethod
    def from_spec(cls, path: str | Path) -> "SimulatedOracle":
        try:
            doc = json.loads(Path(path).read_text())
        except ValueError as exc:
            raise ConfigError(f"oracle spec {path} unparseable: {exc}") from exc
        try:
            return cls(
                labels=doc["labels"],
                fragility=doc["fragility"],
                noise=doc.get("noise", 0.0),
                seed=doc.get("seed", 0),
            )
        except KeyError as exc:
            raise ConfigError(f"oracle spec {path} missing key {exc}") from exc

    def _wrong_label(self, source_id: str) -> str:
        # Stable per image and disjoint from the truth pool by construction.
        return f"glitch-{zlib.crc32(source_id.encode()) & 0xFFFF:04x}"

    def predict(self, payload: CompressedImage) -> list[str]:
        sid = payload.source_id
        if sid not in self._labels:
            raise BackendRejectedError(f"oracle knows no source id {sid!r}")
        true_label = self._labels[sid]
        if payload.quality >= self._fragility[sid]:
            if self.noise > 0.0 and self._rng.random() < self.noise:
                others = [l for l in self._pool if l != true_label]
                if others:
                    return [others[int(self._rng.integers(len(others)))]]
                return [self._wrong_label(sid)]
            return [true_label]
        return [self._wrong_label(sid)]


@dataclass
class HttpBackendConfig:
    url: str
    label_path: str = "labels"
    timeout_s: float = 10.0
    headers: dict[str, str] = field(default_factory=dict)
    retry_backoff_s: float = 0.5
    min_interval_s: float = 0.0


def _pluck_labels(node, parts: list[str]) -> list[str]:
    if not parts:
        if isinstance(node, str):
            return [node]
        if isinstance(node, list) and all(isinstance(x, str) for x in node):
            return list(node)
        raise KeyError("terminal node is not a label or label list")
    if isinstance(node, dict):
        if parts[0] not in node:
            raise KeyError(parts[0])
        return _pluck_labels(node[parts[0]], parts[1:])
    if isinstance(node, list):
        out: list[str] = []
        for element in node:
            out.extend(_pluck_labels(element, parts))
        return out
    raise KeyError(parts[0])


class HttpBackend:
    """POSTs JPEG bytes to a labeling endpoint.

    The body is the payload verbatim; labels come out of the JSON reply at
    a dotted field path (lists along the way are mapped over, preserving
    order). Transient failures get one retry after a backoff; client-side
    rate limiting enforces a minimum call interval.
    """

    def __init__(self, config: HttpBackendConfig):
        self.config = config
        self._session = requests.Session()
        self._last_call = 0.0

    def _throttle(self) -> None:
        if self.config.min_interval_s <= 0:
            return
        wait = self.config.min_interval_s - (time.monotonic() - self._last_call)
        if wait > 0:
            time.sleep(wait)

    def _post_once(self, payload: CompressedImage) -> list[str]:
        self._throttle()
        headers = {"Content-Type": "image/jpeg", **self.config.headers}
        try:
            resp = self._session.post(
                self.config.url,
                data=payload.payload,
                headers=headers,
                timeout=self.config.timeout_s,
            )
        except requests.Timeout as exc:
            raise BackendTimeoutError(str(exc)) from exc
        except requests.RequestException as exc:
            raise BackendUnavailableError(str(exc)) from exc
        finally:
            self._last_call = time.monotonic()
        if resp.status_code >= 500:
            raise BackendUnavailableError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendRejectedError(f"HTTP {resp.status_code}")
        try:
            doc = resp.json()
            return _pluck_labels(doc, [p for p in self.config.label_path.split(".") if p])
        except (ValueError, KeyError) as exc:
            raise BackendRejectedError(f"unusable reply: {exc}") from exc

    def predict(self, payload: CompressedImage) -> list[str]:
        try:
            return self._post_once(payload)
        except (BackendUnavailableError, BackendTimeoutError):
            time.sleep(self.config.retry_backoff_s)
            return self._post_once(payload)


@dataclass(frozen=True)
class StreamItem:
    image: Image.Image
    source_id: str
    scenery_id: str
    position: int


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    scenery_id: str


class SceneryStream:
    """Manifest-driven image supplier with a fixed, reproducible order.

    Manifest lines are either JSON objects {"path", "scenery_id"} or bare
    paths (scenery defaults to ""). Paths resolve relative to the
    manifest's directory. Iteration decodes lazily and ends with the
    normal iterator protocol; exhaustion is not an error.
    """

    def __init__(self, manifest_path: str | Path):
        manifest_path = Path(manifest_path)
        base = manifest_path.parent
        self.entries: list[ManifestEntry] = []
        for lineno, line in enumerate(manifest_path.read_text().splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                try:
                    doc = json.loads(line)
                    rel = doc["path"]
                except (ValueError, KeyError) as exc:
                    raise ConfigError(
                        f"{manifest_path}:{lineno}: bad manifest line: {exc}"
                    ) from exc
                scenery = str(doc.get("scenery_id", ""))
            else:
                rel, scenery = line, ""
            self.entries.append(ManifestEntry(path=base / rel, scenery_id=scenery))

    def __len__(self) -> int:
        return len(self.entries)

    def item_at(self, index: int) -> StreamItem:
        entry = self.entries[index]
        return StreamItem(
            image=load_raster(entry.path),
            source_id=entry.path.stem,
            scenery_id=entry.scenery_id,
            position=index,
        )

    def __iter__(self):
        for i in range(len(self.entries)):
            yield self.item_at(i)
