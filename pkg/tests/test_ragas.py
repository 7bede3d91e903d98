import pytest

from clinrag.backends import ScriptedGenerator
from clinrag.evaluation.harness import EvalCase
from clinrag.evaluation.ragas import (
    RagasScores,
    _ranked_precision,
    score_ragas,
    split_sentences,
)


def case(**overrides):
    values = dict(
        case_id="c1",
        guideline_tag="htn",
        question="What is first-line therapy?",
        ground_truth="ACE inhibitors are first-line therapy.",
        contexts=["ACE inhibitors are first-line therapy.", "Unrelated COPD text."],
        answer="ACE inhibitors are first-line therapy.",
    )
    values.update(overrides)
    return EvalCase(**values)


def script_for(case_obj, *, statements, support, recall, precision, utilization,
               tp, fn, questions=None):
    """Build the scripted response queue in the documented call order."""
    questions = questions or [case_obj.question] * 3
    responses = list(questions)
    responses.append("\n".join(statements))
    responses.extend("yes" if flag else "no" for flag in support)
    responses.extend("yes" if flag else "no" for flag in recall)
    responses.extend("yes" if flag else "no" for flag in precision)
    responses.extend("yes" if flag else "no" for flag in utilization)
    responses.extend("yes" if flag else "no" for flag in tp)
    responses.extend("no" if flag else "yes" for flag in fn)
    return ScriptedGenerator(responses)


class TestRankedPrecision:
    def test_worked_example(self):
        # positions [relevant, irrelevant] -> (1/1*1 + 1/2*0) / 1
        assert _ranked_precision([True, False]) == 1.0

    def test_late_relevance_scores_lower(self):
        assert _ranked_precision([False, True]) == 0.5

    def test_all_irrelevant(self):
        assert _ranked_precision([False, False]) == 0.0

    def test_all_relevant(self):
        assert _ranked_precision([True, True, True]) == 1.0


class TestSentenceSplit:
    def test_multi_sentence(self):
        assert split_sentences("One. Two! Three?") == ["One.", "Two!", "Three?"]

    def test_single_clause(self):
        assert split_sentences("no terminator") == ["no terminator"]


class TestScoreRagas:
    def test_identical_answer_scores_high(self, embedder):
        c = case()
        generator = script_for(
            c,
            statements=["ACE inhibitors are first-line therapy."],
            support=[True],
            recall=[True],
            precision=[True, False],
            utilization=[True, False],
            tp=[True],
            fn=[False],
        )
        scores, warnings = score_ragas(c, embedder, generator)
        assert warnings == []
        assert scores.answer_similarity == pytest.approx(1.0, abs=1e-9)
        assert scores.answer_relevancy == pytest.approx(1.0, abs=1e-9)
        assert scores.faithfulness == 1.0
        assert scores.context_recall == 1.0
        assert scores.context_precision == 1.0
        assert scores.context_utilization == 1.0
        # statement F1 = 1, similarity = 1 -> 0.75 + 0.25
        assert scores.answer_correctness == pytest.approx(1.0, abs=1e-9)

    def test_faithfulness_ratios(self, embedder):
        c = case()
        generator = script_for(
            c,
            statements=["First statement.", "Second statement."],
            support=[True, False],
            recall=[True],
            precision=[True, False],
            utilization=[True, False],
            tp=[True, True],
            fn=[False],
        )
        scores, _ = score_ragas(c, embedder, generator)
        assert scores.faithfulness == 0.5

    def test_fully_supported_statements(self, embedder):
        c = case()
        generator = script_for(
            c,
            statements=["First statement.", "Second statement."],
            support=[True, True],
            recall=[True],
            precision=[True, False],
            utilization=[True, False],
            tp=[True, True],
            fn=[False],
        )
        scores, _ = score_ragas(c, embedder, generator)
        assert scores.faithfulness == 1.0

    def test_context_precision_formula(self, embedder):
        c = case(contexts=["relevant text", "irrelevant text", "also irrelevant"])
        generator = script_for(
            c,
            statements=["One statement."],
            support=[True],
            recall=[True],
            precision=[True, False, False],
            utilization=[False, True, False],
            tp=[True],
            fn=[False],
        )
        scores, _ = score_ragas(c, embedder, generator)
        assert scores.context_precision == 1.0
        assert scores.context_utilization == 0.5

    def test_determinism_across_runs(self, embedder):
        def run():
            c = case()
            generator = script_for(
                c,
                statements=["A statement."],
                support=[True],
                recall=[True],
                precision=[True, False],
                utilization=[True, False],
                tp=[True],
                fn=[False],
            )
            return score_ragas(c, embedder, generator)

        results = [run() for _ in range(10)]
        assert all(r == results[0] for r in results)

    def test_unparseable_verdict_makes_metric_absent(self, embedder):
        c = case()
        generator = script_for(
            c,
            statements=["A statement."],
            support=[True],
            recall=[True],
            precision=[True, False],
            utilization=[True, False],
            tp=[True],
            fn=[False],
        )
        # corrupt the faithfulness verdict (5th scripted response)
        generator._queue[4] = "garbled ???"
        scores, warnings = score_ragas(c, embedder, generator)
        assert scores.faithfulness is None
        assert any("faithfulness" in w for w in warnings)
        assert scores.context_recall is not None  # later metrics unaffected

    def test_missing_contexts_rejected(self, embedder):
        with pytest.raises(ValueError):
            score_ragas(case(contexts=[]), embedder, ScriptedGenerator([]))

    def test_missing_answer_rejected(self, embedder):
        with pytest.raises(ValueError):
            score_ragas(case(answer=" "), embedder, ScriptedGenerator([]))

    def test_answer_correctness_mixes_f1_and_similarity(self, embedder):
        c = case(answer="ACE inhibitors help. Extra unsupported claim.")
        generator = script_for(
            c,
            statements=["ACE inhibitors help.", "Extra unsupported claim."],
            support=[True, True],
            recall=[True],
            precision=[True, False],
            utilization=[True, False],
            tp=[True, False],  # one TP, one FP
            fn=[False],  # no FN
        )
        scores, _ = score_ragas(c, embedder, generator)
        # F1 = 2*1 / (2*1 + 1 + 0) = 2/3
        expected = 0.75 * (2 / 3) + 0.25 * scores.answer_similarity
        assert scores.answer_correctness == pytest.approx(expected, abs=1e-9)
