"""Visual page similarity.

Screenshots are embedded into fixed-dimension unit vectors and compared
by Euclidean distance against a calibrated threshold.  The baseline
embedder is a deterministic perceptual reduction (grayscale, 32x32 area
average, mean subtraction, L2 normalization); a learned model can be
registered behind the same interface.

Images are numpy arrays in [0, 255]: HxW grayscale or HxWx3 RGB.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol

import numpy as np
from PIL import Image

BASELINE_EMBEDDER_ID = "gray32-v1"
BASELINE_DIM = 1024
MIN_IMAGE_SIDE = 16
DEGENERATE_VARIANCE_EPS = 1e-6

_LUMA = np.array([0.299, 0.587, 0.114])


class VisualError(Exception):
    pass


class DegenerateImage(VisualError):
    pass


class EmbedderMismatch(VisualError):
    pass


class InvalidSpec(VisualError):
    pass


class InsufficientCorpus(VisualError):
    pass


@dataclass(frozen=True)
class PageEmbedding:
    values: np.ndarray
    embedder_id: str

    def to_list(self) -> list[float]:
        return [float(v) for v in self.values]


def load_png(path: str | Path) -> np.ndarray:
    img = Image.open(path).convert("RGB")
    return np.asarray(img, dtype=np.float64)


def save_png(image: np.ndarray, path: str | Path) -> None:
    arr = np.clip(np.round(image), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def png_bytes_to_array(data: bytes) -> np.ndarray:
    import io

    img = Image.open(io.BytesIO(data)).convert("RGB")
    return np.asarray(img, dtype=np.float64)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 3:
        return image @ _LUMA
    raise VisualError(f"unsupported image shape {image.shape}")


def _area_weights(src: int, dst: int) -> np.ndarray:
    """Row-stochastic (dst x src) matrix of exact area-overlap weights."""
    step = src / dst
    weights = np.zeros((dst, src))
    for i in range(dst):
        lo, hi = i * step, (i + 1) * step
        first, last = int(math.floor(lo)), int(math.ceil(hi))
        for j in range(first, min(last, src)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                weights[i, j] = overlap / step
    return weights


def area_resize(gray: np.ndarray, height: int, width: int) -> np.ndarray:
    wy = _area_weights(gray.shape[0], height)
    wx = _area_weights(gray.shape[1], width)
    return wy @ gray @ wx.T


class Embedder(Protocol):
    embedder_id: str
    dim: int

    def embed(self, image: np.ndarray) -> PageEmbedding: ...


class BaselineEmbedder:
    """Deterministic perceptual embedding: gray, 32x32 area average, zero-mean, unit norm."""

    embedder_id = BASELINE_EMBEDDER_ID
    dim = BASELINE_DIM

    def embed(self, image: np.ndarray) -> PageEmbedding:
        image = np.asarray(image, dtype=np.float64)
        if image.shape[0] < MIN_IMAGE_SIDE or image.shape[1] < MIN_IMAGE_SIDE:
            raise VisualError(f"image too small: {image.shape[:2]}")
        small = area_resize(to_grayscale(image), 32, 32)
        centered = small - small.mean()
        norm = np.linalg.norm(centered)
        if small.var() < DEGENERATE_VARIANCE_EPS or norm == 0.0:
            raise DegenerateImage("near-constant image cannot be embedded")
        return PageEmbedding(values=(centered / norm).ravel(), embedder_id=self.embedder_id)


_EMBEDDERS: dict[str, Embedder] = {BASELINE_EMBEDDER_ID: BaselineEmbedder()}


def register_embedder(embedder: Embedder) -> None:
    _EMBEDDERS[embedder.embedder_id] = embedder


def get_embedder(embedder_id: str = BASELINE_EMBEDDER_ID) -> Embedder:
    try:
        return _EMBEDDERS[embedder_id]
    except KeyError:
        raise VisualError(f"unknown embedder {embedder_id!r}") from None


def embed(image: np.ndarray, embedder_id: str = BASELINE_EMBEDDER_ID) -> PageEmbedding:
    return get_embedder(embedder_id).embed(image)


def distance(a: PageEmbedding, b: PageEmbedding) -> float:
    if a.embedder_id != b.embedder_id:
        raise EmbedderMismatch(f"{a.embedder_id!r} vs {b.embedder_id!r}")
    if a.values.shape != b.values.shape:
        raise EmbedderMismatch(f"dimension {a.values.shape} vs {b.values.shape}")
    return float(np.linalg.norm(a.values - b.values))


@dataclass(frozen=True)
class SimilarityVerdict:
    matched: bool
    nearest_domain: Optional[str]
    nearest_url: Optional[str]
    distance: float
    threshold: float


@dataclass
class StoreEntry:
    domain: str
    url: str
    embedding: PageEmbedding


class EmbeddingStore:
    """Ordered collection of page embeddings, persisted as line-delimited JSON.

    Appends are serialized by an internal lock; reads take a snapshot.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._entries: list[StoreEntry] = []
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            for line in self._path.read_text().splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self._entries.append(StoreEntry(
                        domain=rec["domain"],
                        url=rec["url"],
                        embedding=PageEmbedding(
                            values=np.array(rec["values"], dtype=np.float64),
                            embedder_id=rec["embedder_id"],
                        ),
                    ))

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, entry: StoreEntry) -> None:
        with self._lock:
            self._entries.append(entry)
            if self._path:
                rec = {
                    "domain": entry.domain,
                    "url": entry.url,
                    "embedder_id": entry.embedding.embedder_id,
                    "values": entry.embedding.to_list(),
                }
                with self._path.open("a") as fh:
                    fh.write(json.dumps(rec) + "\n")

    def snapshot(self) -> list[StoreEntry]:
        with self._lock:
            return list(self._entries)


def nearest_match(
    query: PageEmbedding,
    store: EmbeddingStore | Iterable[StoreEntry],
    threshold: float,
    exclude_domain: str | None = None,
) -> SimilarityVerdict:
    """Full scan for the closest stored embedding; ties go to the earliest entry."""
    entries = store.snapshot() if isinstance(store, EmbeddingStore) else list(store)
    if exclude_domain is not None:
        entries = [e for e in entries if e.domain != exclude_domain]
    best: StoreEntry | None = None
    best_dist = math.inf
    for entry in entries:
        d = distance(query, entry.embedding)
        if d < best_dist:
            best, best_dist = entry, d
    if best is None:
        return SimilarityVerdict(False, None, None, math.inf, threshold)
    return SimilarityVerdict(
        matched=best_dist < threshold,
        nearest_domain=best.domain if best_dist < threshold else None,
        nearest_url=best.url if best_dist < threshold else None,
        distance=best_dist,
        threshold=threshold,
    )


@dataclass(frozen=True)
class AugmentationSpec:
    kind: str  # shift | brighten | darken | gaussian_noise
    dx: int = 0
    dy: int = 0
    factor: float = 1.0
    sigma: float = 0.0

    @classmethod
    def shift(cls, dx: int, dy: int) -> "AugmentationSpec":
        return cls(kind="shift", dx=dx, dy=dy)

    @classmethod
    def brighten(cls, factor: float) -> "AugmentationSpec":
        return cls(kind="brighten", factor=factor)

    @classmethod
    def darken(cls, factor: float) -> "AugmentationSpec":
        return cls(kind="darken", factor=factor)

    @classmethod
    def gaussian_noise(cls, sigma: float) -> "AugmentationSpec":
        return cls(kind="gaussian_noise", sigma=sigma)


def augment(image: np.ndarray, spec: AugmentationSpec, seed: int = 0) -> np.ndarray:
    """Apply one augmentation; arrays stay float so transforms compose losslessly."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    if spec.kind == "shift":
        if abs(spec.dx) >= w or abs(spec.dy) >= h:
            raise InvalidSpec(f"shift ({spec.dx},{spec.dy}) exceeds image size {w}x{h}")
        out = np.full_like(image, 255.0)
        src_y = slice(max(0, -spec.dy), min(h, h - spec.dy))
        src_x = slice(max(0, -spec.dx), min(w, w - spec.dx))
        dst_y = slice(max(0, spec.dy), max(0, spec.dy) + (src_y.stop - src_y.start))
        dst_x = slice(max(0, spec.dx), max(0, spec.dx) + (src_x.stop - src_x.start))
        out[dst_y, dst_x] = image[src_y, src_x]
        return out
    if spec.kind in ("brighten", "darken"):
        if spec.factor <= 0:
            raise InvalidSpec("factor must be positive")
        return np.clip(image * spec.factor, 0.0, 255.0)
    if spec.kind == "gaussian_noise":
        if spec.sigma < 0:
            raise InvalidSpec("sigma must be non-negative")
        rng = np.random.default_rng(seed)
        return np.clip(image + rng.normal(0.0, spec.sigma, image.shape), 0.0, 255.0)
    raise InvalidSpec(f"unknown augmentation kind {spec.kind!r}")


@dataclass(frozen=True)
class DomainSample:
    domain: str
    original: np.ndarray
    variants: tuple[np.ndarray, ...] = ()
    foreign: tuple[np.ndarray, ...] = ()


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    precision: float
    recall: float
    f1: float
    positives: int
    negatives: int


def calibrate_threshold(
    corpus: list[DomainSample], embedder_id: str = BASELINE_EMBEDDER_ID
) -> CalibrationResult:
    """Pick the distance cutoff maximizing F1 over the corpus.

    Positives are variant-vs-own-original distances; negatives are
    cross-domain original pairs plus any supplied foreign images.
    """
    if len({s.domain for s in corpus}) < 2:
        raise InsufficientCorpus("need originals from at least two domains")

    originals = {s.domain: embed(s.original, embedder_id) for s in corpus}
    positives: list[float] = []
    negatives: list[float] = []
    for sample in corpus:
        own = originals[sample.domain]
        for variant in sample.variants:
            positives.append(distance(embed(variant, embedder_id), own))
        for image in sample.foreign:
            negatives.append(distance(embed(image, embedder_id), own))
    domains = sorted(originals)
    for i, a in enumerate(domains):
        for b in domains[i + 1:]:
            negatives.append(distance(originals[a], originals[b]))
    if not positives or not negatives:
        raise InsufficientCorpus("corpus yields no positive or no negative pairs")

    all_d = sorted(set(positives) | set(negatives))
    candidates = [(a + b) / 2 for a, b in zip(all_d, all_d[1:])]
    candidates.append(all_d[-1] * 1.01)  # accept-everything bound
    best = None
    for t in candidates:
        tp = sum(1 for d in positives if d < t)
        fp = sum(1 for d in negatives if d < t)
        fn = len(positives) - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        if best is None or f1 > best.f1:
            best = CalibrationResult(t, precision, recall, f1, len(positives), len(negatives))
    return best
