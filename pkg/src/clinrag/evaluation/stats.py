"""Inter-rater agreement and correlation statistics for rating sheets."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from math import sqrt
from pathlib import Path
from typing import Sequence


@dataclass
class RatingSheet:
    rater_id: str
    ratings: dict[str, int] = field(default_factory=dict)  # case_id -> score

    def __post_init__(self):
        for case_id, score in self.ratings.items():
            if not 1 <= int(score) <= 5:
                raise ValueError(f"rating for {case_id} outside 1..5: {score}")


def load_rating_sheets(path: str | Path) -> list[RatingSheet]:
    """Read ``case_id,rater_id,score`` rows into one sheet per rater."""
    by_rater: dict[str, dict[str, int]] = {}
    with Path(path).open(newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            rater = row["rater_id"].strip()
            by_rater.setdefault(rater, {})[row["case_id"].strip()] = int(row["score"])
    return [RatingSheet(rater_id=rater, ratings=ratings) for rater, ratings in by_rater.items()]


def _aligned(a: RatingSheet, b: RatingSheet) -> list[tuple[int, int]]:
    if set(a.ratings) != set(b.ratings):
        raise ValueError(
            f"rating sheets {a.rater_id!r} and {b.rater_id!r} cover different case sets"
        )
    if not a.ratings:
        raise ValueError("rating sheets are empty")
    return [(a.ratings[case_id], b.ratings[case_id]) for case_id in sorted(a.ratings)]


def cohens_kappa(a: RatingSheet, b: RatingSheet) -> float:
    """Chance-corrected agreement between two raters.

    Expected agreement comes from the rater marginals; the degenerate case
    where both raters are constant and identical is defined as 1.0.
    """
    pairs = _aligned(a, b)
    n = len(pairs)
    observed = sum(1 for x, y in pairs if x == y) / n
    marginals_a = Counter(x for x, _ in pairs)
    marginals_b = Counter(y for _, y in pairs)
    expected = sum(
        (marginals_a[cat] / n) * (marginals_b[cat] / n)
        for cat in set(marginals_a) | set(marginals_b)
    )
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def mean_pairwise_kappa(sheets: Sequence[RatingSheet]) -> float:
    """Mean of Cohen's kappa over all rater pairs."""
    if len(sheets) < 2:
        raise ValueError("need at least two rating sheets")
    values = [cohens_kappa(a, b) for a, b in combinations(sheets, 2)]
    return sum(values) / len(values)


def fleiss_kappa(sheets: Sequence[RatingSheet]) -> float:
    """Multi-rater chance-corrected agreement (every rater rates every case)."""
    if len(sheets) < 2:
        raise ValueError("need at least two rating sheets")
    case_ids = set(sheets[0].ratings)
    for sheet in sheets[1:]:
        if set(sheet.ratings) != case_ids:
            raise ValueError("rating sheets cover different case sets")
    if not case_ids:
        raise ValueError("rating sheets are empty")
    raters = len(sheets)
    categories = sorted({score for sheet in sheets for score in sheet.ratings.values()})
    counts = []
    for case_id in sorted(case_ids):
        row = Counter(sheet.ratings[case_id] for sheet in sheets)
        counts.append([row.get(cat, 0) for cat in categories])

    per_case = [
        (sum(c * c for c in row) - raters) / (raters * (raters - 1)) for row in counts
    ]
    observed = sum(per_case) / len(per_case)
    totals = [sum(row[j] for row in counts) for j in range(len(categories))]
    grand = sum(totals)
    expected = sum((t / grand) ** 2 for t in totals)
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample correlation coefficient; undefined for constant series."""
    if len(x) != len(y):
        raise ValueError("series must have equal length")
    if len(x) < 2:
        raise ValueError("need at least two points")
    n = len(x)
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    dx = [value - mean_x for value in x]
    dy = [value - mean_y for value in y]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise ValueError("correlation is undefined for a constant series")
    covariance = sum(a * b for a, b in zip(dx, dy))
    return covariance / sqrt(var_x * var_y)
