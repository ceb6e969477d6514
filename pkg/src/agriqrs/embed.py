"""Embedding providers for the contextual query view.

Three interchangeable providers sit behind one spec:

* ``hashed``: deterministic feature-hashing bag of tokens. No model files,
  stable across platforms, good enough to make identical texts coincide
  and unrelated texts near-orthogonal.
* ``file``: precomputed vectors from a JSONL file of
  ``{"text": ..., "embedding": [...]}`` rows.
* ``service``: an HTTP endpoint speaking ``POST /embed``
  ``{"texts": [...]}`` -> ``{"dim": d, "embeddings": [[...]]}``.
"""

from __future__ import annotations

import hashlib
import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, EmbeddingError
from .textproc import tokenize

ENDPOINT_ENV_VAR = "AGRIQRS_EMBED_ENDPOINT"
_SERVICE_CHUNK = 128

VALID_KINDS = ("hashed", "file", "service")


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "hashed"
    dim: int = 768
    seed: int = 0
    path: str | None = None
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ConfigurationError(
                f"unknown embedder kind {self.kind!r}; expected one of {VALID_KINDS}"
            )
        if self.dim < 1:
            raise ConfigurationError(f"embedder dim must be >= 1, got {self.dim}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "seed": self.seed,
            "path": self.path,
            "endpoint": self.endpoint,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EmbedderSpec":
        known = {k: data[k] for k in ("kind", "dim", "seed", "path", "endpoint") if k in data}
        return cls(**known)


@lru_cache(maxsize=262144)
def _token_slot(token: str, dim: int, seed: int) -> tuple[int, float]:
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=9, key=str(seed).encode("utf-8")
    ).digest()
    idx = int.from_bytes(digest[:8], "little") % dim
    sign = 1.0 if digest[8] & 1 else -1.0
    return idx, sign


def hashed_embedding(text: str, dim: int = 768, seed: int = 0) -> np.ndarray:
    """Bag-of-tokens feature hashing: one signed slot per token occurrence,
    L2-normalized. Empty token lists give the zero vector."""
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        idx, sign = _token_slot(token, dim, seed)
        vec[idx] += sign
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec.astype(np.float32)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 when either is zero."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class HashedEmbedder:
    def __init__(self, spec: EmbedderSpec):
        self.spec = spec
        self.dim = spec.dim

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = hashed_embedding(text, self.dim, self.spec.seed)
        return out


class FileEmbedder:
    """Precomputed vectors keyed by exact text."""

    def __init__(self, spec: EmbedderSpec):
        if not spec.path:
            raise ConfigurationError("file embedder needs a path")
        self.spec = spec
        self._table: dict[str, np.ndarray] = {}
        dim: int | None = None
        try:
            fh = open(spec.path, encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot open embeddings file {spec.path}: {exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    text = row["text"]
                    vec = np.asarray(row["embedding"], dtype=np.float32)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise EmbeddingError(
                        f"bad embeddings row at {spec.path}:{lineno}: {exc}"
                    ) from exc
                if vec.ndim != 1:
                    raise EmbeddingError(f"embedding at {spec.path}:{lineno} is not a vector")
                if dim is None:
                    dim = int(vec.shape[0])
                elif int(vec.shape[0]) != dim:
                    raise EmbeddingError(
                        f"inconsistent dimensions in {spec.path}: {dim} then {vec.shape[0]}"
                    )
                self._table[text] = vec
        if dim is None:
            raise EmbeddingError(f"embeddings file {spec.path} is empty")
        self.dim = dim

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            vec = self._table.get(text)
            if vec is None:
                raise EmbeddingError(f"no precomputed embedding for text {text!r}")
            out[i] = vec
        return out


class ServiceEmbedder:
    """Remote embedding endpoint. The environment variable
    AGRIQRS_EMBED_ENDPOINT overrides the configured endpoint."""

    def __init__(self, spec: EmbedderSpec, timeout: float = 30.0):
        endpoint = os.environ.get(ENDPOINT_ENV_VAR) or spec.endpoint
        if not endpoint:
            raise ConfigurationError(
                f"service embedder needs an endpoint ({ENDPOINT_ENV_VAR} or spec.endpoint)"
            )
        self.spec = spec
        self.endpoint = endpoint.rstrip("/")
        self.dim = spec.dim
        self.timeout = timeout

    def _post(self, texts: list[str]) -> np.ndarray:
        payload = json.dumps({"texts": texts}).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint + "/embed",
            data=payload,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise EmbeddingError(
                f"embedding service returned HTTP {exc.code} for {self.endpoint}/embed"
            ) from exc
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise EmbeddingError(f"embedding service unreachable: {exc}") from exc
        try:
            dim = int(body["dim"])
            rows = body["embeddings"]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"malformed embedding service response: {exc}") from exc
        if dim != self.dim:
            raise EmbeddingError(
                f"embedding service dimension {dim} does not match configured {self.dim}"
            )
        if len(rows) != len(texts):
            raise EmbeddingError(
                f"embedding service returned {len(rows)} rows for {len(texts)} texts"
            )
        arr = np.asarray(rows, dtype=np.float32)
        if arr.shape != (len(texts), dim):
            raise EmbeddingError(f"embedding service returned shape {arr.shape}")
        return arr

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float32)
        chunks = [
            self._post(texts[i : i + _SERVICE_CHUNK])
            for i in range(0, len(texts), _SERVICE_CHUNK)
        ]
        return np.vstack(chunks)


def make_embedder(spec: EmbedderSpec):
    if spec.kind == "hashed":
        return HashedEmbedder(spec)
    if spec.kind == "file":
        return FileEmbedder(spec)
    return ServiceEmbedder(spec)


def embed_texts(provider, texts: list[str]) -> np.ndarray:
    """Embed with duplicate texts collapsed to one provider call each."""
    order: dict[str, int] = {}
    for t in texts:
        if t not in order:
            order[t] = len(order)
    unique = list(order)
    vecs = provider.embed_batch(unique)
    if vecs.shape[0] != len(unique):
        raise EmbeddingError(
            f"provider returned {vecs.shape[0]} vectors for {len(unique)} texts"
        )
    return vecs[[order[t] for t in texts]]


def write_embeddings_jsonl(path, texts: list[str], vectors: np.ndarray) -> None:
    """Write the file-provider format; one {"text", "embedding"} row per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for text, vec in zip(texts, vectors):
            fh.write(json.dumps({"text": text, "embedding": [float(x) for x in vec]}))
            fh.write("\n")
