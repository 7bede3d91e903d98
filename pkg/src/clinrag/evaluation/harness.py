"""Dataset-driven evaluation: run cases through the answering pipeline and
score each one with the configured metric set.

Datasets are JSONL; scored output mirrors the input rows plus answer,
contexts, metrics and warnings. Per-case failures are recorded and the run
keeps going.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..backends import Embedder, GenerationParams, Generator
from ..engine import RagConfig, RagQuery, answer_query
from ..fhir import PatientBundle
from ..store import VectorStore
from ..summarize import summarize_template
from .judge import JudgeParseError, judge_rubric
from .ragas import RagasScores, score_ragas
from .text_metrics import bertscore_f1, meteor, rouge_l_f1

logger = logging.getLogger(__name__)


@dataclass
class EvalCase:
    case_id: str
    guideline_tag: str
    question: str
    ground_truth: str
    patient_bundle: dict | None = None
    contexts: list[str] = field(default_factory=list)
    answer: str = ""

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError(f"case {self.case_id}: question must be non-empty")
        if not self.ground_truth.strip():
            raise ValueError(f"case {self.case_id}: ground_truth must be non-empty")


@dataclass
class MetricScores:
    bertscore_f1: float | None = None
    rouge_l_f1: float | None = None
    meteor: float | None = None
    judge_score: int | None = None
    ragas: RagasScores | None = None

    def as_dict(self) -> dict:
        return {
            "bertscore_f1": self.bertscore_f1,
            "rouge_l_f1": self.rouge_l_f1,
            "meteor": self.meteor,
            "judge_score": self.judge_score,
            "ragas": self.ragas.as_dict() if self.ragas else None,
        }


@dataclass
class ScoredCase:
    case: EvalCase
    metrics: MetricScores
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        row = {
            "case_id": self.case.case_id,
            "guideline_tag": self.case.guideline_tag,
            "question": self.case.question,
            "ground_truth": self.case.ground_truth,
        }
        if self.case.patient_bundle is not None:
            row["patient_bundle"] = self.case.patient_bundle
        row.update(
            {
                "answer": self.case.answer,
                "contexts": list(self.case.contexts),
                "metrics": self.metrics.as_dict(),
                "warnings": list(self.warnings),
            }
        )
        return row


def load_dataset(path: str | Path) -> tuple[list[EvalCase], list[str]]:
    """Parse a JSONL dataset; malformed lines become warnings, not failures."""
    cases: list[EvalCase] = []
    warnings: list[str] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                cases.append(
                    EvalCase(
                        case_id=str(data["case_id"]),
                        guideline_tag=str(data.get("guideline_tag", "")),
                        question=str(data["question"]),
                        ground_truth=str(data["ground_truth"]),
                        patient_bundle=data.get("patient_bundle"),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                warnings.append(f"line {line_no}: {exc}")
    return cases, warnings


def write_scored_jsonl(scored: list[ScoredCase], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for item in scored:
            handle.write(json.dumps(item.as_dict(), ensure_ascii=False) + "\n")


def score_case(
    case: EvalCase,
    embedder: Embedder,
    *,
    with_judge: bool = False,
    with_ragas: bool = False,
    judge_generator: Generator | None = None,
    ragas_generator: Generator | None = None,
    judge_params: GenerationParams | None = None,
) -> ScoredCase:
    """Compute the metric block for a case that already has an answer."""
    warnings: list[str] = []
    metrics = MetricScores(
        bertscore_f1=bertscore_f1(case.answer, case.ground_truth, embedder),
        rouge_l_f1=rouge_l_f1(case.answer, case.ground_truth),
        meteor=meteor(case.answer, case.ground_truth),
    )
    if with_judge:
        if judge_generator is None:
            raise ValueError("with_judge requires a judge generator")
        for attempt in (1, 2):  # a parse failure earns one retry
            try:
                verdict = judge_rubric(
                    case.question, case.answer, case.ground_truth, judge_generator, judge_params
                )
                metrics.judge_score = verdict.score
                break
            except JudgeParseError as exc:
                if attempt == 2:
                    warnings.append(f"judge: {exc}")
    if with_ragas:
        if ragas_generator is None:
            raise ValueError("with_ragas requires a judge generator")
        ragas_scores, ragas_warnings = score_ragas(case, embedder, ragas_generator)
        metrics.ragas = ragas_scores
        warnings.extend(ragas_warnings)
    return ScoredCase(case=case, metrics=metrics, warnings=warnings)


def run_eval(
    cases: list[EvalCase],
    *,
    embedder: Embedder,
    store: VectorStore,
    generator: Generator,
    rag_config: RagConfig | None = None,
    with_judge: bool = False,
    with_ragas: bool = False,
    judge_generator: Generator | None = None,
    ragas_generator: Generator | None = None,
    reference_date: dt.date | None = None,
    params: GenerationParams | None = None,
) -> tuple[list[ScoredCase], list[str]]:
    """Answer and score every case; returns scored cases plus run warnings."""
    rag_config = rag_config or RagConfig()
    reference_date = reference_date or dt.date.today()
    scored: list[ScoredCase] = []
    run_warnings: list[str] = []
    for case in cases:
        try:
            summary = None
            if case.patient_bundle:
                bundle = PatientBundle.from_fhir_json(case.patient_bundle)
                summary = summarize_template(bundle, reference_date)
            query = RagQuery(question=case.question, summary=summary)
            answer = answer_query(query, rag_config, embedder, store, generator, params)
            case.answer = answer.answer_text
            case.contexts = [hit.text for hit in answer.sources]
            scored.append(
                score_case(
                    case,
                    embedder,
                    with_judge=with_judge,
                    with_ragas=with_ragas,
                    judge_generator=judge_generator or generator,
                    ragas_generator=ragas_generator or judge_generator or generator,
                    judge_params=params,
                )
            )
        except Exception as exc:
            logger.warning("case %s failed: %s", case.case_id, exc)
            run_warnings.append(f"case {case.case_id}: {exc}")
    return scored, run_warnings
