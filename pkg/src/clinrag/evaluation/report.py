"""Per-guideline aggregation of scored cases, with delimited, plain-text and
figure outputs.

The text table carries one row per guideline group plus an overall row, with
the judge average and the three text metrics; a second block lists the RAG
metric means per guideline. Bar charts of the same aggregates are rendered
to PNG files next to the report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import ScoredCase
from .ragas import RagasScores

TEXT_METRIC_KEYS = ("bertscore_f1", "rouge_l_f1", "meteor")
RAGAS_KEYS = (
    "answer_correctness",
    "answer_relevancy",
    "answer_similarity",
    "context_precision",
    "context_recall",
    "context_utilization",
    "faithfulness",
)
OVERALL = "overall"


def _stats(values: list[float]) -> dict | None:
    if not values:
        return None
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    return {"mean": mean, "std": math.sqrt(variance), "n": len(values)}


@dataclass
class EvalReport:
    system_name: str
    groups: dict[str, dict] = field(default_factory=dict)  # tag -> metric aggregates

    def as_dict(self) -> dict:
        return {"system_name": self.system_name, "groups": self.groups}


def _collect(scored: list[ScoredCase]) -> dict:
    aggregates: dict = {"cases": len(scored)}
    for key in ("judge_score",) + TEXT_METRIC_KEYS:
        values = [
            getattr(item.metrics, key)
            for item in scored
            if getattr(item.metrics, key) is not None
        ]
        aggregates[key] = _stats([float(v) for v in values])
    ragas_block: dict = {}
    for key in RAGAS_KEYS:
        values = [
            getattr(item.metrics.ragas, key)
            for item in scored
            if item.metrics.ragas is not None and getattr(item.metrics.ragas, key) is not None
        ]
        ragas_block[key] = _stats(values)
    aggregates["ragas"] = ragas_block
    return aggregates


def aggregate_report(scored: list[ScoredCase], system_name: str = "rag-pipeline") -> EvalReport:
    """Group scored cases by guideline tag and add an overall group."""
    if not scored:
        raise ValueError("cannot aggregate an empty case list")
    report = EvalReport(system_name=system_name)
    tags = sorted({item.case.guideline_tag for item in scored})
    for tag in tags:
        members = [item for item in scored if item.case.guideline_tag == tag]
        report.groups[tag or "(untagged)"] = _collect(members)
    report.groups[OVERALL] = _collect(scored)
    return report


def _cell(stats: dict | None, digits: int = 4) -> str:
    if stats is None:
        return "-"
    return f"{stats['mean']:.{digits}f}"


def render_text_table(report: EvalReport) -> str:
    headers = ["SYSTEM", "GUIDELINE", "AVERAGE SCORE", "BERTSCORE F1", "ROUGE-L F1", "METEOR"]
    rows = [headers]
    for tag, aggregates in report.groups.items():
        rows.append(
            [
                report.system_name,
                tag,
                _cell(aggregates.get("judge_score")),
                _cell(aggregates.get("bertscore_f1")),
                _cell(aggregates.get("rouge_l_f1"), 5),
                _cell(aggregates.get("meteor"), 5),
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]

    tags = list(report.groups)
    ragas_rows = [["RAGAS METRIC"] + [tag.upper() for tag in tags]]
    for key in RAGAS_KEYS:
        ragas_rows.append(
            [key.replace("_", " ").upper()]
            + [_cell(report.groups[tag]["ragas"].get(key), 3) for tag in tags]
        )
    widths = [max(len(row[i]) for row in ragas_rows) for i in range(len(ragas_rows[0]))]
    lines += [""] + [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in ragas_rows
    ]
    return "\n".join(lines) + "\n"


def _grouped_bars(ax, tags: list[str], series: dict[str, list[float | None]], title: str):
    positions = range(len(tags))
    width = 0.8 / max(len(series), 1)
    for offset, (label, values) in enumerate(series.items()):
        xs = [p + offset * width for p in positions]
        heights = [v if v is not None else 0.0 for v in values]
        ax.bar(xs, heights, width=width, label=label)
    ax.set_xticks([p + 0.4 - width / 2 for p in positions])
    ax.set_xticklabels(tags, rotation=20, ha="right")
    ax.set_title(title)
    ax.legend(fontsize=8)


def render_figures(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Bar charts of the aggregate means, one PNG per metric family."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tags = list(report.groups)
    written: list[Path] = []

    fig, (ax_judge, ax_text) = plt.subplots(1, 2, figsize=(11, 4))
    judge = [
        (report.groups[t].get("judge_score") or {}).get("mean") for t in tags
    ]
    _grouped_bars(ax_judge, tags, {"judge average": judge}, "Judge average (1-5)")
    ax_judge.set_ylim(0, 5)
    text_series = {
        key: [(report.groups[t].get(key) or {}).get("mean") for t in tags]
        for key in TEXT_METRIC_KEYS
    }
    _grouped_bars(ax_text, tags, text_series, "Text metrics")
    ax_text.set_ylim(0, 1)
    fig.tight_layout()
    path = out / "metrics_by_guideline.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(11, 4))
    ragas_series = {
        key: [(report.groups[t]["ragas"].get(key) or {}).get("mean") for t in tags]
        for key in RAGAS_KEYS
    }
    _grouped_bars(ax, tags, ragas_series, "RAG metrics")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    path = out / "ragas_by_guideline.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def write_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, report.txt and the figures under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    json_path.write_text(json.dumps(report.as_dict(), indent=2), encoding="utf-8")
    text_path = out / "report.txt"
    text_path.write_text(render_text_table(report), encoding="utf-8")
    figures = render_figures(report, out / "figures")
    return {"json": json_path, "text": text_path, "figures_dir": out / "figures",
            "figures": figures}
