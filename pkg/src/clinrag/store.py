"""Exact cosine top-k vector store with JSONL persistence.

The store is a brute-force scan over normalized vectors: every query scores
every record, so results are exact by construction. A cached matrix keeps
that scan fast enough for guideline-scale corpora.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import EmbeddingVector

FORMAT_VERSION = 1


class StoreFormatError(Exception):
    """Persisted index is corrupt or from an unsupported format version."""


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} != {v.dim}")
    if u.model_id != v.model_id:
        raise ValueError(f"model mismatch: {u.model_id!r} != {v.model_id!r}")
    a = np.asarray(u.values, dtype=np.float64)
    b = np.asarray(v.values, dtype=np.float64)
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    return float(a @ b / (norm_a * norm_b))


@dataclass(frozen=True)
class StoredVector:
    chunk_id: str
    vector: EmbeddingVector
    text: str
    doc_id: str
    guideline_tag: str
    start: int
    end: int


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float
    text: str
    doc_id: str
    guideline_tag: str
    start: int
    end: int


@dataclass(frozen=True)
class IndexManifest:
    model_id: str
    dim: int
    chunk_count: int
    corpus_hash: str
    ingest: dict
    format_version: int = FORMAT_VERSION

    def as_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "model_id": self.model_id,
            "dim": self.dim,
            "chunk_count": self.chunk_count,
            "corpus_hash": self.corpus_hash,
            "ingest": self.ingest,
        }


class VectorStore:
    """In-memory record set answering exact cosine top-k queries."""

    def __init__(self, model_id: str | None = None, dim: int | None = None):
        self._records: dict[str, StoredVector] = {}
        self._model_id = model_id
        self._dim = dim
        self._corpus_hash = ""
        self._ingest_config: dict = {}
        self._cache: tuple | None = None

    def __len__(self) -> int:
        return len(self._records)

    @property
    def model_id(self) -> str | None:
        return self._model_id

    @property
    def dim(self) -> int | None:
        return self._dim

    def set_context(self, corpus_hash: str | None = None, ingest_config: dict | None = None) -> None:
        if corpus_hash is not None:
            self._corpus_hash = corpus_hash
        if ingest_config is not None:
            self._ingest_config = dict(ingest_config)

    def manifest(self) -> IndexManifest:
        return IndexManifest(
            model_id=self._model_id or "",
            dim=self._dim or 0,
            chunk_count=len(self._records),
            corpus_hash=self._corpus_hash,
            ingest=dict(self._ingest_config),
        )

    def upsert(self, records: list[StoredVector]) -> int:
        """Insert or replace records by chunk_id. Validates everything before
        writing anything, so a bad record never causes a partial write."""
        model_id = self._model_id
        dim = self._dim
        for record in records:
            vec = record.vector
            if model_id is None:
                model_id, dim = vec.model_id, vec.dim
            if vec.model_id != model_id:
                raise ValueError(
                    f"record {record.chunk_id} has model {vec.model_id!r}, store has {model_id!r}"
                )
            if vec.dim != dim:
                raise ValueError(f"record {record.chunk_id} has dim {vec.dim}, store has {dim}")
            if not any(vec.values):
                raise ValueError(f"record {record.chunk_id} has a zero-norm vector")
        for record in records:
            self._records[record.chunk_id] = record
        if records:
            self._model_id, self._dim = model_id, dim
            self._cache = None
        return len(records)

    def _ensure_cache(self):
        if self._cache is None:
            ids = sorted(self._records)
            matrix = np.asarray([self._records[i].vector.values for i in ids], dtype=np.float64)
            norms = np.linalg.norm(matrix, axis=1, keepdims=True)
            matrix = matrix / norms
            tags = np.asarray([self._records[i].guideline_tag for i in ids])
            self._cache = (ids, matrix, tags)
        return self._cache

    def search_top_k(
        self,
        query: EmbeddingVector,
        k: int,
        filter_tag: str | None = None,
    ) -> list[SearchHit]:
        """The ``min(k, matching records)`` highest-cosine records, sorted by
        descending score with ties broken by ascending chunk_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._records:
            return []
        if query.dim != self._dim:
            raise ValueError(f"query dim {query.dim} does not match store dim {self._dim}")
        if query.model_id != self._model_id:
            raise ValueError(
                f"query model {query.model_id!r} does not match store model {self._model_id!r}"
            )
        ids, matrix, tags = self._ensure_cache()
        q = np.asarray(query.values, dtype=np.float64)
        norm = float(np.linalg.norm(q))
        if norm == 0.0:
            raise ValueError("cannot search with a zero-norm query")
        scores = matrix @ (q / norm)

        candidates = np.arange(len(ids))
        if filter_tag is not None:
            candidates = candidates[tags == filter_tag]
        if candidates.size == 0:
            return []
        # ids are cached in ascending order, so index order breaks score ties
        order = candidates[np.argsort(-scores[candidates], kind="stable")][:k]
        hits = []
        for idx in order:
            record = self._records[ids[idx]]
            hits.append(
                SearchHit(
                    chunk_id=record.chunk_id,
                    score=float(scores[idx]),
                    text=record.text,
                    doc_id=record.doc_id,
                    guideline_tag=record.guideline_tag,
                    start=record.start,
                    end=record.end,
                )
            )
        return hits

    def persist(self, path: str | Path) -> None:
        """Write ``manifest.json`` and ``vectors.jsonl`` under ``path``."""
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        (root / "manifest.json").write_text(
            json.dumps(self.manifest().as_dict(), indent=2), encoding="utf-8"
        )
        with (root / "vectors.jsonl").open("w", encoding="utf-8") as handle:
            for chunk_id in sorted(self._records):
                record = self._records[chunk_id]
                handle.write(
                    json.dumps(
                        {
                            "chunk_id": record.chunk_id,
                            "doc_id": record.doc_id,
                            "guideline_tag": record.guideline_tag,
                            "start": record.start,
                            "end": record.end,
                            "text": record.text,
                            "vector": list(record.vector.values),
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str | Path) -> "VectorStore":
        root = Path(path)
        manifest_path = root / "manifest.json"
        vectors_path = root / "vectors.jsonl"
        if not manifest_path.is_file() or not vectors_path.is_file():
            raise StoreFormatError(f"no index found at {root}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise StoreFormatError(f"corrupt manifest.json: {exc}") from exc
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise StoreFormatError(
                f"unsupported format_version {version}; expected {FORMAT_VERSION}"
            )
        model_id = manifest.get("model_id") or None
        dim = manifest.get("dim") or None

        store = cls()
        records: list[StoredVector] = []
        with vectors_path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                    vector = EmbeddingVector(
                        values=tuple(float(x) for x in data["vector"]),
                        dim=len(data["vector"]),
                        model_id=model_id or "",
                    )
                    records.append(
                        StoredVector(
                            chunk_id=data["chunk_id"],
                            vector=vector,
                            text=data["text"],
                            doc_id=data["doc_id"],
                            guideline_tag=data["guideline_tag"],
                            start=int(data["start"]),
                            end=int(data["end"]),
                        )
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    raise StoreFormatError(f"corrupt vectors.jsonl line {line_no}: {exc}") from exc
        if dim is not None:
            for record in records:
                if record.vector.dim != dim:
                    raise StoreFormatError(
                        f"record {record.chunk_id} has dim {record.vector.dim}, manifest says {dim}"
                    )
        store.upsert(records)
        store._model_id = store._model_id or model_id
        store._dim = store._dim or dim
        if len(records) != manifest.get("chunk_count"):
            raise StoreFormatError(
                f"vectors.jsonl holds {len(records)} records, "
                f"manifest says {manifest.get('chunk_count')}"
            )
        store.set_context(
            corpus_hash=manifest.get("corpus_hash", ""),
            ingest_config=manifest.get("ingest", {}),
        )
        return store
