"""Exact-search vector store: ingestion, chunking, embedding, retrieval.

Retrieval is a linear scan over normalized vectors, so results equal the
brute-force cosine ranking by construction. The local embedder is a hashed
bag-of-words, fully deterministic, which keeps every retrieval test offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import requests

from .errors import EmptyTextError, StoreError
from .util import write_json

log = logging.getLogger(__name__)

COLLECTIONS = ("project", "generic", "language_manuals")
DEFAULT_DIMENSION = 256
DEFAULT_CHUNK_SIZE = 1000
DEFAULT_OVERLAP = 200
FALLBACK_SCORE_THRESHOLD = 0.25

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


@dataclass(frozen=True)
class DocumentChunk:
    doc_id: str
    chunk_index: int
    text: str
    source_collection: str

    def __post_init__(self) -> None:
        if self.source_collection not in COLLECTIONS:
            raise ValueError(f"unknown collection {self.source_collection!r}")
        if not self.text:
            raise ValueError("chunk text must be nonempty")

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "text": self.text,
            "source_collection": self.source_collection,
        }


@dataclass(frozen=True)
class ScoredChunk:
    chunk: DocumentChunk
    score: float


def tokenize(text: str) -> list[str]:
    return [token.lower() for token in _TOKEN_RE.findall(text)]


def token_bucket(token: str, dimension: int = DEFAULT_DIMENSION) -> int:
    """Feature-hash bucket for one lowercased token; exposed for tests."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dimension


class Embedder:
    dimension: int = DEFAULT_DIMENSION

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


class LocalHashEmbedder(Embedder):
    """Hashed bag-of-words: lowercase tokens, bucket counts, L2-normalize."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION) -> None:
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise EmptyTextError("cannot embed text with no tokens")
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            counts[token_bucket(token, self.dimension)] += 1.0
        counts /= np.linalg.norm(counts)
        return counts.astype(np.float32)


class HttpEmbedder(Embedder):
    """Remote embedding endpoint speaking the common /v1/embeddings shape."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        dimension: int,
        api_key: str = "",
        session: requests.Session | None = None,
    ) -> None:
        self._base_url = base_url.rstrip("/")
        self._model_id = model_id
        self.dimension = dimension
        self._api_key = api_key
        self._session = session or requests.Session()

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyTextError("cannot embed empty text")
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        reply = self._session.post(
            f"{self._base_url}/v1/embeddings",
            json={"model": self._model_id, "input": text},
            headers=headers,
            timeout=60,
        )
        reply.raise_for_status()
        values = np.asarray(reply.json()["data"][0]["embedding"], dtype=np.float64)
        if values.shape != (self.dimension,):
            raise StoreError(
                f"embedding dimension {values.shape} != ({self.dimension},)"
            )
        norm = np.linalg.norm(values)
        if norm == 0:
            raise StoreError("remote embedder returned a zero vector")
        return (values / norm).astype(np.float32)


def chunk_text(
    text: str, chunk_size: int = DEFAULT_CHUNK_SIZE, overlap: int = DEFAULT_OVERLAP
) -> list[tuple[int, str]]:
    """Split into (offset, piece) windows advancing by chunk_size - overlap."""
    if chunk_size <= 0 or not 0 <= overlap < chunk_size:
        raise StoreError(f"bad chunking config: size={chunk_size} overlap={overlap}")
    stride = chunk_size - overlap
    return [
        (start, text[start : start + chunk_size])
        for start in range(0, len(text), stride)
    ]


class VectorStore:
    """In-memory exact store with directory persistence."""

    def __init__(
        self,
        embedder: Embedder | None = None,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        overlap: int = DEFAULT_OVERLAP,
    ) -> None:
        self.embedder = embedder or LocalHashEmbedder()
        self.chunk_size = chunk_size
        self.overlap = overlap
        self._chunks: list[DocumentChunk] = []
        self._vectors: list[np.ndarray] = []
        self._keys: set[tuple[str, int]] = set()

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def chunks(self) -> tuple[DocumentChunk, ...]:
        return tuple(self._chunks)

    def ingest(
        self, collection: str, documents: Iterable[tuple[str, str]]
    ) -> int:
        """Chunk, embed, and index documents; commits only if all embeds pass."""
        if collection not in COLLECTIONS:
            raise StoreError(f"unknown collection {collection!r}")
        staged_chunks: list[DocumentChunk] = []
        staged_vectors: list[np.ndarray] = []
        for doc_id, text in documents:
            if not text.strip():
                log.warning("skipping empty document %r", doc_id)
                continue
            for index, (_, piece) in enumerate(
                chunk_text(text, self.chunk_size, self.overlap)
            ):
                key = (doc_id, index)
                if key in self._keys or any(
                    (c.doc_id, c.chunk_index) == key for c in staged_chunks
                ):
                    raise StoreError(f"duplicate chunk key {key}")
                chunk = DocumentChunk(
                    doc_id=doc_id,
                    chunk_index=index,
                    text=piece,
                    source_collection=collection,
                )
                staged_chunks.append(chunk)
                staged_vectors.append(self.embedder.embed(piece))
        self._chunks.extend(staged_chunks)
        self._vectors.extend(staged_vectors)
        self._keys.update((c.doc_id, c.chunk_index) for c in staged_chunks)
        return len(staged_chunks)

    def query(
        self,
        text: str,
        k: int = 5,
        collections: Sequence[str] | None = None,
    ) -> list[ScoredChunk]:
        """Top-k by cosine, descending; ties by (doc_id, chunk_index) ascending."""
        if k < 1:
            raise StoreError("k must be >= 1")
        wanted = set(collections) if collections is not None else set(COLLECTIONS)
        candidates = [
            (chunk, vector)
            for chunk, vector in zip(self._chunks, self._vectors)
            if chunk.source_collection in wanted
        ]
        if not candidates:
            return []
        probe = self.embedder.embed(text).astype(np.float64)
        scored = [
            ScoredChunk(chunk, float(np.dot(vector.astype(np.float64), probe)))
            for chunk, vector in candidates
        ]
        scored.sort(key=lambda sc: (-sc.score, sc.chunk.doc_id, sc.chunk.chunk_index))
        return scored[:k]

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        write_json(
            directory / "meta.json",
            {
                "dimension": self.embedder.dimension,
                "chunk_count": len(self._chunks),
                "chunk_size": self.chunk_size,
                "overlap": self.overlap,
            },
        )
        with (directory / "chunks.jsonl").open("w", encoding="utf-8") as handle:
            for chunk in self._chunks:
                handle.write(
                    json.dumps(chunk.to_dict(), ensure_ascii=False, sort_keys=True)
                    + "\n"
                )
        matrix = (
            np.vstack(self._vectors)
            if self._vectors
            else np.zeros((0, self.embedder.dimension), dtype=np.float32)
        )
        matrix.astype("<f4").tofile(directory / "vectors.bin")

    @classmethod
    def load(cls, directory: Path, embedder: Embedder | None = None) -> "VectorStore":
        meta_path = directory / "meta.json"
        if not meta_path.is_file():
            raise StoreError(f"no store at {directory}")
        meta = json.loads(meta_path.read_text("utf-8"))
        store = cls(
            embedder=embedder or LocalHashEmbedder(int(meta["dimension"])),
            chunk_size=int(meta.get("chunk_size", DEFAULT_CHUNK_SIZE)),
            overlap=int(meta.get("overlap", DEFAULT_OVERLAP)),
        )
        if store.embedder.dimension != int(meta["dimension"]):
            raise StoreError(
                f"embedder dimension {store.embedder.dimension} != "
                f"stored {meta['dimension']}"
            )
        chunk_lines = (directory / "chunks.jsonl").read_text("utf-8").splitlines()
        for line in chunk_lines:
            if not line.strip():
                continue
            raw = json.loads(line)
            chunk = DocumentChunk(
                doc_id=str(raw["doc_id"]),
                chunk_index=int(raw["chunk_index"]),
                text=str(raw["text"]),
                source_collection=str(raw["source_collection"]),
            )
            store._chunks.append(chunk)
            store._keys.add((chunk.doc_id, chunk.chunk_index))
        flat = np.fromfile(directory / "vectors.bin", dtype="<f4")
        expected = len(store._chunks) * store.embedder.dimension
        if flat.size != expected:
            raise StoreError(
                f"vectors.bin has {flat.size} floats, expected {expected}"
            )
        if len(store._chunks):
            matrix = flat.reshape(len(store._chunks), store.embedder.dimension)
            store._vectors = [row.copy() for row in matrix]
        return store


def insufficient_information(
    results: Sequence[ScoredChunk],
    k: int,
    threshold: float = FALLBACK_SCORE_THRESHOLD,
) -> bool:
    """Fallback trigger: weak best hit or too few hits to fill the request."""
    if len(results) < k:
        return True
    return results[0].score < threshold


def format_hits(results: Sequence[ScoredChunk]) -> str:
    if not results:
        return "WARNING: knowledge base returned no passages"
    parts = []
    for i, hit in enumerate(results):
        parts.append(
            f"[{i + 1}] ({hit.chunk.doc_id}#{hit.chunk.chunk_index}, "
            f"score {hit.score:.3f})\n{hit.chunk.text}"
        )
    return "\n\n".join(parts)
