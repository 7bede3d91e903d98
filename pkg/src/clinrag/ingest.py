"""Guideline corpus loading and chunking.

Documents are split into overlapping character chunks that carry exact
offsets into their source text, so every retrieved excerpt can be traced
back to the guideline it came from.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .backends import Embedder
    from .store import IndexManifest, VectorStore

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1200
DEFAULT_CHUNK_OVERLAP = 100
DEFAULT_SEPARATORS: tuple[str, ...] = ("\n\n", "\n", " ", "")

TEXT_EXTENSIONS = {".txt", ".text", ".md"}


class CorpusError(Exception):
    """The corpus directory itself cannot be read."""


class IndexBuildError(Exception):
    """Index construction aborted part-way through.

    ``completed_chunks`` counts chunks that were embedded before the failure.
    """

    def __init__(self, message: str, completed_chunks: int = 0):
        super().__init__(message)
        self.completed_chunks = completed_chunks


@dataclass(frozen=True)
class IngestConfig:
    chunk_size: int = DEFAULT_CHUNK_SIZE
    chunk_overlap: int = DEFAULT_CHUNK_OVERLAP
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self):
        if self.chunk_size <= 0:
            raise ValueError("chunk_size must be positive")
        if not 0 <= self.chunk_overlap < self.chunk_size:
            raise ValueError("chunk_overlap must satisfy 0 <= overlap < chunk_size")

    def as_dict(self) -> dict:
        return {
            "chunk_size": self.chunk_size,
            "chunk_overlap": self.chunk_overlap,
            "separators": list(self.separators),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IngestConfig":
        return cls(
            chunk_size=int(data.get("chunk_size", DEFAULT_CHUNK_SIZE)),
            chunk_overlap=int(data.get("chunk_overlap", DEFAULT_CHUNK_OVERLAP)),
            separators=tuple(data.get("separators", DEFAULT_SEPARATORS)),
        )


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    path: str
    guideline_tag: str
    text: str


@dataclass(frozen=True)
class GuidelineChunk:
    chunk_id: str
    doc_id: str
    start: int
    end: int
    text: str
    guideline_tag: str


def load_corpus(
    corpus_dir: str | Path,
    tag_map: dict[str, str] | None = None,
) -> tuple[list[SourceDocument], list[str]]:
    """Load all plain-text files under ``corpus_dir``.

    Returns the documents sorted by path plus a list of per-file error
    messages (undecodable files are skipped, not fatal). The guideline tag
    comes from ``tag_map`` (keyed by relative path or file name) and falls
    back to the parent directory name.
    """
    root = Path(corpus_dir)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not readable: {root}")
    tag_map = tag_map or {}

    docs: list[SourceDocument] = []
    errors: list[str] = []
    try:
        paths = sorted(p for p in root.rglob("*") if p.is_file())
    except OSError as exc:
        raise CorpusError(f"corpus directory not readable: {root}: {exc}") from exc

    for path in paths:
        if path.suffix.lower() not in TEXT_EXTENSIONS:
            continue
        rel = path.relative_to(root).as_posix()
        try:
            raw = path.read_bytes()
            text = raw.decode("utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            errors.append(f"{rel}: {exc}")
            continue
        text = text.replace("\r\n", "\n").replace("\r", "\n")
        tag = tag_map.get(rel) or tag_map.get(path.name) or path.parent.name
        docs.append(SourceDocument(doc_id=rel, path=str(path), guideline_tag=tag, text=text))
    return docs, errors


def _split_keep_separator(text: str, sep: str) -> list[str]:
    # Separators become standalone pieces so concatenation reproduces the
    # input and fully-split pieces contain no separator occurrence at all.
    pieces: list[str] = []
    for part in text.split(sep):
        if part:
            pieces.append(part)
        pieces.append(sep)
    pieces.pop()
    return [p for p in pieces if p]


def _split_pieces(text: str, separators: tuple[str, ...], chunk_size: int) -> list[str]:
    if not text:
        return []
    if len(text) <= chunk_size:
        return [text]
    if not separators:
        return [text]
    sep, rest = separators[0], separators[1:]
    if sep == "":
        return list(text)
    out: list[str] = []
    for piece in _split_keep_separator(text, sep):
        if len(piece) <= chunk_size:
            out.append(piece)
        else:
            out.extend(_split_pieces(piece, rest, chunk_size))
    return out


def split_document(doc: SourceDocument, cfg: IngestConfig | None = None) -> list[GuidelineChunk]:
    """Split a document into overlapping chunks.

    Pieces produced by the separator hierarchy are packed greedily while the
    running total stays within ``chunk_size``; each new chunk starts with the
    longest whole-piece suffix of the previous one that fits in
    ``chunk_overlap``. Chunk offsets index into ``doc.text`` and together
    cover the whole document.
    """
    cfg = cfg or IngestConfig()
    pieces = _split_pieces(doc.text, tuple(cfg.separators), cfg.chunk_size)

    spans: list[tuple[int, int]] = []
    cur_lens: list[int] = []
    cur_len = 0
    cur_start = 0
    offset = 0
    for piece in pieces:
        plen = len(piece)
        if cur_lens and cur_len + plen > cfg.chunk_size:
            spans.append((cur_start, offset))
            carried: list[int] = []
            carry_len = 0
            for qlen in reversed(cur_lens):
                if carry_len + qlen > cfg.chunk_overlap:
                    break
                if carry_len + qlen + plen > cfg.chunk_size:
                    break
                carried.insert(0, qlen)
                carry_len += qlen
            cur_lens = carried
            cur_len = carry_len
            cur_start = offset - carry_len
        cur_lens.append(plen)
        cur_len += plen
        offset += plen
    if cur_lens:
        spans.append((cur_start, offset))

    return [
        GuidelineChunk(
            chunk_id=f"{doc.doc_id}#{i:04d}",
            doc_id=doc.doc_id,
            start=start,
            end=end,
            text=doc.text[start:end],
            guideline_tag=doc.guideline_tag,
        )
        for i, (start, end) in enumerate(spans)
    ]


def corpus_hash(docs: list[SourceDocument]) -> str:
    """Content hash over doc ids and texts, independent of load order."""
    digest = hashlib.sha256()
    for doc in sorted(docs, key=lambda d: d.doc_id):
        digest.update(doc.doc_id.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(doc.text.encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()


def build_index(
    docs: list[SourceDocument],
    cfg: IngestConfig,
    embedder: "Embedder",
    store: "VectorStore",
) -> "IndexManifest":
    """Chunk, embed and upsert every document, returning the index manifest."""
    from .store import StoredVector

    records: list[StoredVector] = []
    completed = 0
    for doc in docs:
        for chunk in split_document(doc, cfg):
            try:
                vector = embedder.embed_text(chunk.text)
            except Exception as exc:
                raise IndexBuildError(
                    f"embedding failed at chunk {chunk.chunk_id} "
                    f"({completed} chunks completed): {exc}",
                    completed_chunks=completed,
                ) from exc
            records.append(
                StoredVector(
                    chunk_id=chunk.chunk_id,
                    vector=vector,
                    text=chunk.text,
                    doc_id=chunk.doc_id,
                    guideline_tag=chunk.guideline_tag,
                    start=chunk.start,
                    end=chunk.end,
                )
            )
            completed += 1
    store.upsert(records)
    store.set_context(corpus_hash=corpus_hash(docs), ingest_config=cfg.as_dict())
    return store.manifest()
