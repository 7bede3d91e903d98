"""Evaluation toolkit: text metrics, rubric judge, RAG metrics, inter-rater
statistics and report aggregation."""

from .harness import EvalCase, MetricScores, ScoredCase, load_dataset, run_eval, score_case
from .judge import JudgeParseError, JudgeVerdict, judge_rubric, render_judge_prompt
from .ragas import RagasScores, score_ragas
from .report import EvalReport, aggregate_report, render_text_table, write_report
from .stats import RatingSheet, cohens_kappa, fleiss_kappa, mean_pairwise_kappa, pearson_r
from .text_metrics import bertscore_f1, meteor, rouge_l_f1, tokenize

__all__ = [
    "EvalCase",
    "EvalReport",
    "JudgeParseError",
    "JudgeVerdict",
    "MetricScores",
    "RagasScores",
    "RatingSheet",
    "ScoredCase",
    "aggregate_report",
    "bertscore_f1",
    "cohens_kappa",
    "fleiss_kappa",
    "judge_rubric",
    "load_dataset",
    "mean_pairwise_kappa",
    "meteor",
    "pearson_r",
    "render_judge_prompt",
    "render_text_table",
    "rouge_l_f1",
    "run_eval",
    "score_case",
    "score_ragas",
    "tokenize",
    "write_report",
]
