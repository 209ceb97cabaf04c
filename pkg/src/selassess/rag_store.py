"""Embedding store for retrieval-augmented assessment.

Transcript chunks and principle texts are embedded into fixed-dimension
vectors and retrieved by cosine similarity. The built-in feature-hashing
embedder is fully deterministic so the retrieval path runs offline; a
remote /embeddings endpoint can be plugged in instead.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol

import numpy as np
import requests

from .errors import (
    DimensionMismatch,
    DuplicateRecordId,
    EmbedderUnavailable,
    EmptyStore,
)

DEFAULT_DIMENSION = 256
DEFAULT_TOP_K = 4

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class SourceKind(str, Enum):
    TRANSCRIPT_CHUNK = "transcript_chunk"
    PRINCIPLE_TEXT = "principle_text"


@dataclass(frozen=True)
class EmbeddingRecord:
    record_id: str
    source_kind: SourceKind
    source_ref: str
    text: str
    vector: tuple[float, ...]


@dataclass(frozen=True)
class RetrievalHit:
    record_id: str
    score: float


class Embedder(Protocol):
    embedder_id: str
    dimension: int

    def embed(self, texts: list[str]) -> list[list[float]]: ...


class HashingEmbedder:
    """Deterministic bag-of-words feature hashing.

    Tokens (lowercased, split on non-alphanumerics) are hashed into d
    buckets with a +-1 sign from a second hash; the result is L2-normalized.
    Text with no tokens embeds to the zero vector.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise DimensionMismatch("dimension must be positive")
        self.dimension = dimension
        self.embedder_id = f"hashing-{dimension}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> list[float]:
        vec = np.zeros(self.dimension)
        for token in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.md5(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dimension
            sign = 1.0 if digest[8] & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec.tolist()


class RemoteEmbedder:
    """Embedder backed by an OpenAI-compatible /embeddings endpoint."""

    def __init__(self, base_url: str, model: str, api_key: str = "",
                 dimension: int = 1536, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.dimension = dimension
        self.timeout = timeout
        self.embedder_id = f"remote-{model}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        try:
            resp = requests.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, "input": texts},
                headers={"Authorization": f"Bearer {self.api_key}"}
                if self.api_key else {},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            data = resp.json()["data"]
            vectors = [list(map(float, item["embedding"])) for item in data]
        except (requests.RequestException, KeyError, ValueError, TypeError) as exc:
            raise EmbedderUnavailable(str(exc)) from exc
        for v in vectors:
            if len(v) != self.dimension:
                raise DimensionMismatch(
                    f"remote embedding has dimension {len(v)}, expected {self.dimension}")
        return vectors


def embed_texts(texts: list[str], embedder: Embedder) -> list[list[float]]:
    """Embed a batch, enforcing output length and dimension uniformity."""
    if not texts:
        raise EmbedderUnavailable("texts must be non-empty")
    vectors = embedder.embed(texts)
    if len(vectors) != len(texts):
        raise EmbedderUnavailable("embedder returned wrong batch size")
    for v in vectors:
        if len(v) != embedder.dimension:
            raise DimensionMismatch(
                f"vector dimension {len(v)} != {embedder.dimension}")
        if not np.all(np.isfinite(v)):
            raise DimensionMismatch("vector contains NaN/Inf")
    return vectors


def cosine(a, b) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimensions differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


class VectorStore:
    """In-memory exact-scan store with flat-file persistence.

    Concurrent reads are safe; indexing takes a write lock.
    """

    def __init__(self, dimension: int, embedder_id: str = ""):
        if dimension < 1:
            raise DimensionMismatch("dimension must be positive")
        self.dimension = dimension
        self.embedder_id = embedder_id
        self._records: dict[str, EmbeddingRecord] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def get(self, record_id: str) -> EmbeddingRecord:
        return self._records[record_id]

    def index(self, records: list[EmbeddingRecord]) -> None:
        with self._lock:
            for rec in records:
                if len(rec.vector) != self.dimension:
                    raise DimensionMismatch(
                        f"record {rec.record_id}: dimension {len(rec.vector)} "
                        f"!= store dimension {self.dimension}")
                if rec.record_id in self._records:
                    raise DuplicateRecordId(rec.record_id)
            for rec in records:
                self._records[rec.record_id] = rec

    def retrieve(self, query_text: str, k: int, embedder: Embedder,
                 filter_kind: Optional[SourceKind] = None) -> list[RetrievalHit]:
        """Top-k records by cosine similarity, ties broken by record_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        candidates = [r for r in self._records.values()
                      if filter_kind is None or r.source_kind is filter_kind]
        if not candidates:
            raise EmptyStore("no records match the retrieval filter")
        query_vec = embed_texts([query_text], embedder)[0]
        hits = [RetrievalHit(r.record_id, cosine(query_vec, r.vector))
                for r in candidates]
        hits.sort(key=lambda h: (-h.score, h.record_id))
        return hits[:k]

    def save(self, path: str | Path) -> None:
        payload = {
            "dimension": self.dimension,
            "embedder_id": self.embedder_id,
            "count": len(self._records),
            "records": [
                {"record_id": r.record_id, "source_kind": r.source_kind.value,
                 "source_ref": r.source_ref, "text": r.text,
                 "vector": list(r.vector)}
                for r in sorted(self._records.values(), key=lambda r: r.record_id)
            ],
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False),
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "VectorStore":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        store = cls(payload["dimension"], payload.get("embedder_id", ""))
        store.index([
            EmbeddingRecord(
                record_id=r["record_id"],
                source_kind=SourceKind(r["source_kind"]),
                source_ref=r["source_ref"],
                text=r["text"],
                vector=tuple(float(x) for x in r["vector"]),
            )
            for r in payload["records"]
        ])
        return store
