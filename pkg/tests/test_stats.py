import pytest

from clinrag.evaluation.stats import (
    RatingSheet,
    cohens_kappa,
    fleiss_kappa,
    load_rating_sheets,
    mean_pairwise_kappa,
    pearson_r,
)


def sheet(rater, scores):
    return RatingSheet(rater_id=rater, ratings={f"c{i}": s for i, s in enumerate(scores)})


class TestCohensKappa:
    def test_identical_sheets(self):
        a = sheet("a", [1, 2, 3, 4, 5, 1])
        b = sheet("b", [1, 2, 3, 4, 5, 1])
        assert cohens_kappa(a, b) == 1.0

    def test_worked_example(self):
        a = sheet("a", [1, 1, 2, 2])
        b = sheet("b", [1, 1, 2, 1])
        assert cohens_kappa(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_constant_identical_raters(self):
        assert cohens_kappa(sheet("a", [3, 3, 3]), sheet("b", [3, 3, 3])) == 1.0

    def test_bounded_by_observed_agreement(self):
        a = sheet("a", [1, 2, 3, 4, 5, 2, 3, 1])
        b = sheet("b", [1, 2, 3, 3, 5, 2, 1, 2])
        pairs = [(a.ratings[c], b.ratings[c]) for c in a.ratings]
        observed = sum(1 for x, y in pairs if x == y) / len(pairs)
        assert cohens_kappa(a, b) <= observed

    def test_mismatched_case_sets_rejected(self):
        a = RatingSheet("a", {"c0": 1})
        b = RatingSheet("b", {"c1": 1})
        with pytest.raises(ValueError):
            cohens_kappa(a, b)


class TestMultiRater:
    def test_mean_pairwise_identical(self):
        sheets = [sheet(r, [1, 2, 3, 4]) for r in "abc"]
        assert mean_pairwise_kappa(sheets) == 1.0

    def test_fleiss_identical(self):
        sheets = [sheet(r, [1, 2, 3, 4]) for r in "abc"]
        assert fleiss_kappa(sheets) == pytest.approx(1.0, abs=1e-12)

    def test_fleiss_between_minus_one_and_one(self):
        sheets = [
            sheet("a", [1, 2, 3, 4, 5]),
            sheet("b", [2, 2, 3, 5, 4]),
            sheet("c", [1, 3, 3, 4, 4]),
        ]
        assert -1.0 <= fleiss_kappa(sheets) <= 1.0

    def test_needs_two_sheets(self):
        with pytest.raises(ValueError):
            mean_pairwise_kappa([sheet("a", [1, 2])])


class TestPearson:
    def test_perfect_positive(self):
        x = [1.0, 2.0, 3.0, 4.0]
        y = [2 * v + 1 for v in x]
        assert pearson_r(x, y) == pytest.approx(1.0, abs=1e-12)

    def test_perfect_negative(self):
        x = [1.0, 2.0, 3.0]
        assert pearson_r(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-12)

    def test_worked_example(self):
        assert pearson_r([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)

    def test_constant_series_rejected(self):
        with pytest.raises(ValueError):
            pearson_r([1, 1, 1], [1, 2, 3])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pearson_r([1, 2], [1, 2, 3])

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            pearson_r([1], [2])


class TestRatingSheetCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "ratings.csv"
        path.write_text(
            "case_id,rater_id,score\n"
            "c0,alice,4\nc1,alice,5\nc0,bob,4\nc1,bob,3\n",
            encoding="utf-8",
        )
        sheets = {s.rater_id: s for s in load_rating_sheets(path)}
        assert sheets["alice"].ratings == {"c0": 4, "c1": 5}
        assert sheets["bob"].ratings == {"c0": 4, "c1": 3}

    def test_out_of_range_rating_rejected(self):
        with pytest.raises(ValueError):
            RatingSheet("a", {"c0": 6})
