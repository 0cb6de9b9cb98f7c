"""Deterministic text embeddings via signed feature hashing, plus cosine.

The built-in encoder maps word and character-trigram features into a fixed
number of slots with FNV-1a (seed-prefixed), accumulates tf or sublinear-tf
weights in input order, and L2-normalizes. No vocabulary, no weights on
disk, bit-exact across runs and platforms. A remote HTTP provider speaks a
small JSON protocol for plugging in real sentence encoders.
"""
from __future__ import annotations

import json
import math
import struct
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from ._text import WORD_RE
from .hashing import fnv1a_64

NORM_TOLERANCE = 1e-4


class EmbeddingError(Exception):
    pass


class RemoteProviderError(EmbeddingError):
    """Transport failure or malformed response from a remote provider."""


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 384
    use_word_tokens: bool = True
    use_char_trigrams: bool = True
    tf_weighting: str = "sublinear"  # raw | sublinear
    hash_seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 8:
            raise ValueError("dim must be >= 8")
        if not (self.use_word_tokens or self.use_char_trigrams):
            raise ValueError("at least one feature family must be enabled")
        if self.tf_weighting not in ("raw", "sublinear"):
            raise ValueError(f"unknown tf weighting {self.tf_weighting!r}")
        if not 0 <= self.hash_seed < 2**64:
            raise ValueError("hash_seed must be an unsigned 64-bit value")


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray  # float32, length dim

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def tobytes(self) -> bytes:
        return self.values.tobytes()


def tokenize(text: str, config: EncoderConfig) -> list[str]:
    """Feature strings for a text: "w:"-prefixed word tokens and
    "c:"-prefixed trigrams of the whitespace-collapsed lowercase text."""
    lowered = text.lower()
    features: list[str] = []
    if config.use_word_tokens:
        features.extend(f"w:{tok}" for tok in WORD_RE.findall(lowered))
    if config.use_char_trigrams:
        collapsed = " ".join(lowered.split())
        features.extend(
            f"c:{collapsed[i : i + 3]}" for i in range(len(collapsed) - 2)
        )
    return features


def hash_feature(feature: str, seed: int, dim: int) -> tuple[int, int]:
    """Slot index and sign for a feature.

    FNV-1a-64 over the feature's UTF-8 bytes prefixed with the seed as eight
    little-endian bytes; index is h mod dim, sign comes from bit 63.
    """
    h = fnv1a_64(seed.to_bytes(8, "little", signed=False) + feature.encode("utf-8"))
    sign = -1 if (h >> 63) & 1 else 1
    return h % dim, sign


def embed(text: str, config: EncoderConfig) -> EmbeddingVector:
    """Hash features into slots and L2-normalize.

    Accumulation runs in first-occurrence order of unique features (fixed
    input-order summation) so identical inputs produce bit-identical
    vectors. Empty feature lists yield the all-zero sentinel.
    """
    features = tokenize(text, config)
    if not features:
        return EmbeddingVector(np.zeros(config.dim, dtype=np.float32))

    counts: dict[str, int] = {}
    for feature in features:
        counts[feature] = counts.get(feature, 0) + 1

    acc = [0.0] * config.dim
    for feature, tf in counts.items():  # dict preserves first-occurrence order
        weight = float(tf) if config.tf_weighting == "raw" else 1.0 + math.log(tf)
        index, sign = hash_feature(feature, config.hash_seed, config.dim)
        acc[index] += sign * weight

    # fsum is exactly rounded, so the norm (and thus the vector) is
    # bit-identical across platforms; BLAS dot products are not.
    norm = math.sqrt(math.fsum(v * v for v in acc))
    if norm == 0.0:
        # possible only through exact signed cancellation
        return EmbeddingVector(np.zeros(config.dim, dtype=np.float32))
    scaled = np.asarray(acc, dtype=np.float64) / norm
    return EmbeddingVector(scaled.astype(np.float32))


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise EmbeddingError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.is_zero or b.is_zero:
        return 0.0
    va = a.values.astype(np.float64)
    vb = b.values.astype(np.float64)
    dot = math.fsum((va * vb).tolist())
    norm_a = math.sqrt(math.fsum((va * va).tolist()))
    norm_b = math.sqrt(math.fsum((vb * vb).tolist()))
    return dot / (norm_a * norm_b)


class EmbeddingProvider(Protocol):
    """Batch text -> unit vectors, deterministic for a fixed configuration."""

    @property
    def dim(self) -> int: ...

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


class HashingEncoder:
    """Default provider wrapping :func:`embed`."""

    def __init__(self, config: EncoderConfig | None = None):
        self.config = config or EncoderConfig()

    @property
    def dim(self) -> int:
        return self.config.dim

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [embed(text, self.config) for text in texts]


def _renormalize(vector: list[float], dim: int) -> EmbeddingVector:
    arr = np.asarray(vector, dtype=np.float64)
    if arr.shape != (dim,):
        raise RemoteProviderError(
            f"provider returned vector of dim {arr.shape}, expected ({dim},)"
        )
    if not np.all(np.isfinite(arr)):
        raise RemoteProviderError("provider returned non-finite values")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        return EmbeddingVector(np.zeros(dim, dtype=np.float32))
    return EmbeddingVector((arr / norm).astype(np.float32))


class RemoteEncoder:
    """Client for the remote embedding protocol.

    POSTs ``{"model": ..., "texts": [...]}`` and expects
    ``{"dim": D, "vectors": [[...], ...]}``. Vectors are re-normalized
    locally; wrong counts or dims are rejected. Batches run on a small
    worker pool but results are reassembled in request order.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        batch_size: int = 32,
        timeout_secs: float = 10.0,
        max_retries: int = 2,
        backoff_secs: float = 0.5,
        concurrency: int = 4,
        bearer_token: str | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self._dim = dim
        self.batch_size = max(1, batch_size)
        self.timeout_secs = timeout_secs
        self.max_retries = max_retries
        self.backoff_secs = backoff_secs
        self.concurrency = max(1, concurrency)
        self.bearer_token = bearer_token

    @property
    def dim(self) -> int:
        return self._dim

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        texts = list(texts)
        if not texts:
            return []
        batches = [
            texts[i : i + self.batch_size]
            for i in range(0, len(texts), self.batch_size)
        ]
        if len(batches) == 1:
            results = [self._post_batch(batches[0])]
        else:
            with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
                results = list(pool.map(self._post_batch, batches))
        out: list[EmbeddingVector] = []
        for vectors in results:
            out.extend(vectors)
        return out

    def _post_batch(self, batch: list[str]) -> list[EmbeddingVector]:
        import time

        body = json.dumps({"model": self.model, "texts": batch}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.bearer_token:
            headers["Authorization"] = f"Bearer {self.bearer_token}"
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            request = urllib.request.Request(
                self.endpoint, data=body, headers=headers, method="POST"
            )
            try:
                with urllib.request.urlopen(request, timeout=self.timeout_secs) as resp:
                    payload = resp.read()
                return self._decode(payload, expected=len(batch))
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                last_exc = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff_secs * (2**attempt))
        raise RemoteProviderError(
            f"embedding request failed after {self.max_retries + 1} attempts: {last_exc}"
        )

    def _decode(self, payload: bytes, expected: int) -> list[EmbeddingVector]:
        try:
            doc = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise RemoteProviderError(f"provider returned invalid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "vectors" not in doc or "dim" not in doc:
            raise RemoteProviderError("provider response missing dim/vectors")
        if int(doc["dim"]) != self._dim:
            raise RemoteProviderError(
                f"provider dim {doc['dim']} does not match declared dim {self._dim}"
            )
        vectors = doc["vectors"]
        if len(vectors) != expected:
            raise RemoteProviderError(
                f"provider returned {len(vectors)} vectors for {expected} texts"
            )
        return [_renormalize(v, self._dim) for v in vectors]


# --- binary vector cache ------------------------------------------------------

CACHE_MAGIC = b"RRV1"


def write_vector_cache(
    path: str | Path, vectors: dict[str, EmbeddingVector], dim: int
) -> None:
    """Write id -> vector mappings: "RRV1", u32 dim, u64 count, then
    count x (u64 FNV of the id string + dim float32), all little-endian.
    Records are sorted by key hash so identical content is byte-identical.
    """
    entries = sorted(
        (fnv1a_64(news_id.encode("utf-8")), vec) for news_id, vec in vectors.items()
    )
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IQ", dim, len(entries)))
        for key, vec in entries:
            if vec.dim != dim:
                raise EmbeddingError(
                    f"cache write: vector dim {vec.dim} != cache dim {dim}"
                )
            fh.write(struct.pack("<Q", key))
            fh.write(vec.values.astype("<f4").tobytes())


def read_vector_cache(path: str | Path) -> tuple[int, dict[int, EmbeddingVector]]:
    """Read a cache file back as {u64 id hash: vector}."""
    raw = Path(path).read_bytes()
    if raw[:4] != CACHE_MAGIC:
        raise EmbeddingError(f"{path}: bad cache magic {raw[:4]!r}")
    dim, count = struct.unpack_from("<IQ", raw, 4)
    offset = 16
    record = 8 + 4 * dim
    if len(raw) != offset + count * record:
        raise EmbeddingError(f"{path}: truncated cache file")
    vectors: dict[int, EmbeddingVector] = {}
    for _ in range(count):
        (key,) = struct.unpack_from("<Q", raw, offset)
        values = np.frombuffer(
            raw, dtype="<f4", count=dim, offset=offset + 8
        ).astype(np.float32)
        vectors[key] = EmbeddingVector(values)
        offset += record
    return dim, vectors
