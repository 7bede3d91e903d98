"""The retrieval-augmented answering loop.

A query (optionally merged with the patient summary) is embedded, the
closest guideline chunks are retrieved, and a prompt built from summary,
numbered excerpts and question is sent to the generation backend. Answers
carry their sources so every recommendation stays traceable.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

from .backends import Embedder, GenerationParams, Generator
from .store import SearchHit, VectorStore
from .summarize import MedicalSummary

DEFAULT_K = 4
DEFAULT_MAX_CONTEXT_CHARS = 6000
DEFAULT_CONTEXT_DELIMITERS = ("<CTX>", "</CTX>")

SYSTEM_PREAMBLE = (
    "You are a clinical decision-support assistant. Answer the clinician's "
    "question using only the guideline excerpts provided."
)
ANSWER_INSTRUCTION = (
    "Answer using only the guideline excerpts above and cite the excerpt "
    "numbers you relied on, e.g. [1]. If the excerpts do not cover the "
    "question, say so."
)


class RagStageError(Exception):
    """A pipeline stage failed; retrieval results survive for diagnostics."""

    def __init__(self, stage: str, message: str, sources: list[SearchHit] | None = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.sources = sources or []


@dataclass(frozen=True)
class RagConfig:
    k: int = DEFAULT_K
    context_delimiters: tuple[str, str] = DEFAULT_CONTEXT_DELIMITERS
    max_context_chars: int = DEFAULT_MAX_CONTEXT_CHARS

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class RagQuery:
    question: str
    summary: MedicalSummary | None = None
    guideline_filter: str | None = None

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError("question must be non-empty")


@dataclass
class RagAnswer:
    answer_text: str
    sources: list[SearchHit]
    summary_used: str | None
    prompt_hash: str
    timings: dict[str, float] = field(default_factory=dict)


def compose_retrieval_text(query: RagQuery) -> str:
    """Summary first, question after; an empty summary is treated as absent."""
    summary_text = query.summary.text.strip() if query.summary else ""
    if summary_text:
        return f"{summary_text}\n\n{query.question}"
    return query.question


def retrieve_context(
    query: RagQuery,
    cfg: RagConfig,
    embedder: Embedder,
    store: VectorStore,
) -> list[SearchHit]:
    """Top-k retrieval for the merged summary+question text; oversized
    context is trimmed by dropping whole lowest-scoring chunks."""
    vector = embedder.embed_text(compose_retrieval_text(query))
    hits = store.search_top_k(vector, cfg.k, filter_tag=query.guideline_filter)
    while hits and sum(len(h.text) for h in hits) > cfg.max_context_chars:
        hits = hits[:-1]
    return hits


def build_prompt(query: RagQuery, hits: list[SearchHit], cfg: RagConfig) -> str:
    lines = [SYSTEM_PREAMBLE, ""]
    summary_text = query.summary.text.strip() if query.summary else ""
    if summary_text:
        lines += ["PATIENT SUMMARY:", summary_text]
    else:
        lines.append("No patient context.")
    lines += ["", "GUIDELINE EXCERPTS:"]
    if hits:
        open_delim, close_delim = cfg.context_delimiters
        lines.append(open_delim)
        for i, hit in enumerate(hits, start=1):
            lines.append(f"[{i}] ({hit.doc_id}) {hit.text}")
        lines.append(close_delim)
    else:
        lines.append("(none retrieved)")
    lines += ["", "QUESTION:", query.question, "", ANSWER_INSTRUCTION]
    return "\n".join(lines)


def answer_query(
    query: RagQuery,
    cfg: RagConfig,
    embedder: Embedder,
    store: VectorStore,
    generator: Generator,
    params: GenerationParams | None = None,
) -> RagAnswer:
    timings: dict[str, float] = {}

    started = time.perf_counter()
    try:
        hits = retrieve_context(query, cfg, embedder, store)
    except Exception as exc:
        raise RagStageError("retrieve", str(exc)) from exc
    timings["retrieve_s"] = time.perf_counter() - started

    prompt = build_prompt(query, hits, cfg)
    prompt_hash = hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    started = time.perf_counter()
    try:
        answer_text = generator.generate(prompt, params)
    except Exception as exc:
        raise RagStageError("generate", str(exc), sources=hits) from exc
    timings["generate_s"] = time.perf_counter() - started

    summary_text = query.summary.text.strip() if query.summary else ""
    return RagAnswer(
        answer_text=answer_text,
        sources=hits,
        summary_used=summary_text or None,
        prompt_hash=prompt_hash,
        timings=timings,
    )
