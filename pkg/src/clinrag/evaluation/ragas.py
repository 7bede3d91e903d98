"""RAG-specific quality metrics over (question, contexts, answer, reference).

Retriever side: context precision, recall and utilization. Generation side:
faithfulness, answer relevancy, answer similarity and answer correctness.
Sub-judgments are delegated to a generation backend through fixed yes/no and
extraction prompts; embedding similarities come from the pluggable embedder.

Backend call order per scoring run (relevant when scripting responses):
 1. three relevancy question generations
 2. one statement extraction over the answer
 3. one support verdict per extracted statement (faithfulness)
 4. one attribution verdict per reference sentence (context recall)
 5. one relevance verdict per context against the reference (precision)
 6. one relevance verdict per context against the answer (utilization)
 7. one support verdict per extracted statement against the reference,
    then one per reference sentence against the answer (correctness)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from statistics import mean
from typing import TYPE_CHECKING

from ..backends import BackendError, Embedder, GenerationParams, Generator
from ..store import cosine_similarity

if TYPE_CHECKING:
    from .harness import EvalCase

CORRECTNESS_F1_WEIGHT = 0.75
CORRECTNESS_SIMILARITY_WEIGHT = 0.25

QUESTION_GEN_PROMPT = (
    "Write a question this answer responds to. Reply with the question only.\n\n"
    "Answer: {answer}\n\nQuestion:"
)
STATEMENT_EXTRACTION_PROMPT = (
    "Break the following answer into short standalone factual statements, "
    "one per line. Reply with the statements only.\n\n"
    "Answer: {answer}\n\nStatements:"
)
SUPPORT_PROMPT = (
    "Context:\n{context}\n\nStatement: {statement}\n\n"
    "Is the statement supported by the context above? Reply yes or no.\nVerdict:"
)
ATTRIBUTION_PROMPT = (
    "Context:\n{context}\n\nSentence: {sentence}\n\n"
    "Can the sentence be attributed to the context above? Reply yes or no.\nVerdict:"
)
RELEVANCE_PROMPT = (
    "Reference:\n{reference}\n\nPassage:\n{passage}\n\n"
    "Is the passage relevant to the reference above? Reply yes or no.\nVerdict:"
)

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_LINE_PREFIX_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


class RagasJudgeError(Exception):
    """A sub-judgment came back unparseable."""


@dataclass(frozen=True)
class RagasScores:
    answer_correctness: float | None = None
    answer_relevancy: float | None = None
    answer_similarity: float | None = None
    context_precision: float | None = None
    context_recall: float | None = None
    context_utilization: float | None = None
    faithfulness: float | None = None

    def as_dict(self) -> dict:
        return {
            "answer_correctness": self.answer_correctness,
            "answer_relevancy": self.answer_relevancy,
            "answer_similarity": self.answer_similarity,
            "context_precision": self.context_precision,
            "context_recall": self.context_recall,
            "context_utilization": self.context_utilization,
            "faithfulness": self.faithfulness,
        }


def _clamp01(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]


def _parse_statement_lines(raw: str) -> list[str]:
    lines = []
    for line in raw.splitlines():
        cleaned = _LINE_PREFIX_RE.sub("", line).strip()
        if cleaned:
            lines.append(cleaned)
    return lines


def _parse_yes_no(raw: str) -> bool:
    match = re.search(r"[a-zA-Z]+", raw)
    if match is None:
        raise RagasJudgeError(f"verdict is not yes/no: {raw!r}")
    word = match.group(0).lower()
    if word == "yes":
        return True
    if word == "no":
        return False
    raise RagasJudgeError(f"verdict is not yes/no: {raw!r}")


def _ranked_precision(relevance: list[bool]) -> float:
    # sum of precision@i over relevant positions, normalized by relevant count
    hits = 0
    total = 0.0
    for position, relevant in enumerate(relevance, start=1):
        if relevant:
            hits += 1
            total += hits / position
    return total / hits if hits else 0.0


def score_ragas(
    case: "EvalCase",
    embedder: Embedder,
    generator: Generator,
    params: GenerationParams | None = None,
) -> tuple[RagasScores, list[str]]:
    """Compute the full metric block for one scored case.

    Metrics whose sub-judgments fail to parse come back as None and are
    explained in the returned warning list.
    """
    if not case.contexts:
        raise ValueError("scoring requires retrieved contexts")
    if not case.answer.strip():
        raise ValueError("scoring requires a non-empty answer")
    warnings: list[str] = []
    context_block = "\n\n".join(case.contexts)

    def generate(prompt: str) -> str:
        return generator.generate(prompt, params)

    answer_similarity = None
    try:
        answer_similarity = _clamp01(
            cosine_similarity(
                embedder.embed_text(case.answer), embedder.embed_text(case.ground_truth)
            )
        )
    except (ValueError, BackendError) as exc:
        warnings.append(f"answer_similarity: {exc}")

    answer_relevancy = None
    try:
        generated = [
            generate(QUESTION_GEN_PROMPT.format(answer=case.answer)) for _ in range(3)
        ]
        question_vec = embedder.embed_text(case.question)
        answer_relevancy = mean(
            _clamp01(cosine_similarity(embedder.embed_text(q), question_vec))
            for q in generated
        )
    except (RagasJudgeError, BackendError, ValueError) as exc:
        warnings.append(f"answer_relevancy: {exc}")

    statements: list[str] | None = None
    try:
        statements = _parse_statement_lines(
            generate(STATEMENT_EXTRACTION_PROMPT.format(answer=case.answer))
        )
        if not statements:
            raise RagasJudgeError("statement extraction returned no statements")
    except (RagasJudgeError, BackendError) as exc:
        statements = None
        warnings.append(f"statement extraction: {exc}")

    faithfulness = None
    if statements is not None:
        try:
            supported = [
                _parse_yes_no(
                    generate(SUPPORT_PROMPT.format(context=context_block, statement=s))
                )
                for s in statements
            ]
            faithfulness = sum(supported) / len(supported)
        except (RagasJudgeError, BackendError) as exc:
            warnings.append(f"faithfulness: {exc}")

    sentences = split_sentences(case.ground_truth)
    context_recall = None
    try:
        if not sentences:
            raise RagasJudgeError("reference answer has no sentences")
        attributed = [
            _parse_yes_no(
                generate(ATTRIBUTION_PROMPT.format(context=context_block, sentence=s))
            )
            for s in sentences
        ]
        context_recall = sum(attributed) / len(attributed)
    except (RagasJudgeError, BackendError) as exc:
        warnings.append(f"context_recall: {exc}")

    context_precision = None
    try:
        relevance = [
            _parse_yes_no(
                generate(RELEVANCE_PROMPT.format(reference=case.ground_truth, passage=ctx))
            )
            for ctx in case.contexts
        ]
        context_precision = _ranked_precision(relevance)
    except (RagasJudgeError, BackendError) as exc:
        warnings.append(f"context_precision: {exc}")

    context_utilization = None
    try:
        relevance = [
            _parse_yes_no(
                generate(RELEVANCE_PROMPT.format(reference=case.answer, passage=ctx))
            )
            for ctx in case.contexts
        ]
        context_utilization = _ranked_precision(relevance)
    except (RagasJudgeError, BackendError) as exc:
        warnings.append(f"context_utilization: {exc}")

    answer_correctness = None
    if statements is not None and answer_similarity is not None and sentences:
        try:
            true_positive = 0
            false_positive = 0
            for statement in statements:
                if _parse_yes_no(
                    generate(SUPPORT_PROMPT.format(context=case.ground_truth, statement=statement))
                ):
                    true_positive += 1
                else:
                    false_positive += 1
            false_negative = 0
            for sentence in sentences:
                if not _parse_yes_no(
                    generate(SUPPORT_PROMPT.format(context=case.answer, statement=sentence))
                ):
                    false_negative += 1
            denominator = 2 * true_positive + false_positive + false_negative
            statement_f1 = (2 * true_positive / denominator) if denominator else 0.0
            answer_correctness = (
                CORRECTNESS_F1_WEIGHT * statement_f1
                + CORRECTNESS_SIMILARITY_WEIGHT * answer_similarity
            )
        except (RagasJudgeError, BackendError) as exc:
            warnings.append(f"answer_correctness: {exc}")
    elif statements is None or answer_similarity is None:
        warnings.append("answer_correctness: skipped, inputs unavailable")

    return (
        RagasScores(
            answer_correctness=answer_correctness,
            answer_relevancy=answer_relevancy,
            answer_similarity=answer_similarity,
            context_precision=context_precision,
            context_recall=context_recall,
            context_utilization=context_utilization,
            faithfulness=faithfulness,
        ),
        warnings,
    )
