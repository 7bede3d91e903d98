import datetime as dt

import pytest

from clinrag.backends import EchoContextGenerator, ScriptedGenerator
from clinrag.engine import (
    RagConfig,
    RagQuery,
    RagStageError,
    answer_query,
    build_prompt,
    compose_retrieval_text,
    retrieve_context,
)
from clinrag.ingest import IngestConfig, SourceDocument, build_index
from clinrag.store import VectorStore, cosine_similarity
from clinrag.summarize import MedicalSummary


def summary(text):
    return MedicalSummary(text=text, generated_by="template", reference_date=dt.date(2024, 6, 1))


class TestComposeRetrievalText:
    def test_summary_then_question(self):
        query = RagQuery(question="Q", summary=summary("S"))
        assert compose_retrieval_text(query) == "S\n\nQ"

    def test_question_only(self):
        assert compose_retrieval_text(RagQuery(question="Q")) == "Q"

    def test_empty_summary_treated_as_absent(self):
        query = RagQuery(question="Q", summary=summary(""))
        assert compose_retrieval_text(query) == "Q"

    def test_empty_question_rejected(self):
        with pytest.raises(ValueError):
            RagQuery(question="   ")


class TestRetrieveContext:
    def test_small_store_returns_all(self, embedder, seeded_store):
        query = RagQuery(question="hypertension therapy")
        hits = retrieve_context(query, RagConfig(k=4), embedder, seeded_store)
        assert len(hits) == 3  # min(k, store size)

    def test_own_text_ranks_first(self, embedder, seeded_store):
        question = "ACE inhibitors are first-line therapy for hypertension in adults under 55."
        hits = retrieve_context(RagQuery(question=question), RagConfig(), embedder, seeded_store)
        assert hits[0].doc_id == "htn/ace.txt"
        assert hits[0].score == pytest.approx(1.0, abs=1e-9)

    def test_empty_store(self, embedder):
        hits = retrieve_context(RagQuery(question="anything"), RagConfig(), embedder, VectorStore())
        assert hits == []

    def test_context_cap_drops_lowest_scoring(self, embedder, seeded_store):
        cfg = RagConfig(k=3, max_context_chars=90)
        hits = retrieve_context(
            RagQuery(question="hypertension therapy"), cfg, embedder, seeded_store
        )
        assert len(hits) == 1
        assert sum(len(h.text) for h in hits) <= 90

    def test_guideline_filter(self, embedder, seeded_store):
        query = RagQuery(question="hypertension therapy", guideline_filter="copd")
        hits = retrieve_context(query, RagConfig(), embedder, seeded_store)
        assert {h.guideline_tag for h in hits} == {"copd"}


class TestBuildPrompt:
    def test_no_hits_layout(self):
        prompt = build_prompt(RagQuery(question="Q"), [], RagConfig())
        assert "GUIDELINE EXCERPTS:\n(none retrieved)" in prompt
        assert "No patient context." in prompt
        assert "QUESTION:\nQ" in prompt

    def test_numbered_excerpts_in_score_order(self, embedder, seeded_store):
        query = RagQuery(question="hypertension therapy")
        hits = retrieve_context(query, RagConfig(), embedder, seeded_store)
        prompt = build_prompt(query, hits, RagConfig())
        assert prompt.index("[1] ") < prompt.index("[2] ")
        assert "<CTX>" in prompt and "</CTX>" in prompt

    def test_summary_section(self):
        prompt = build_prompt(RagQuery(question="Q", summary=summary("S")), [], RagConfig())
        assert "PATIENT SUMMARY:\nS" in prompt

    def test_deterministic(self, embedder, seeded_store):
        query = RagQuery(question="hypertension therapy")
        hits = retrieve_context(query, RagConfig(), embedder, seeded_store)
        assert build_prompt(query, hits, RagConfig()) == build_prompt(query, hits, RagConfig())


class TestAnswerQuery:
    def test_echo_generator_returns_retrieved_context(self, embedder):
        store = VectorStore()
        sentinel = "ZEBRA-PROTOCOL-17 applies to resistant hypertension."
        build_index(
            [SourceDocument("s.txt", "s.txt", "htn", sentinel)],
            IngestConfig(),
            embedder,
            store,
        )
        answer = answer_query(
            RagQuery(question="What does ZEBRA-PROTOCOL-17 recommend?"),
            RagConfig(),
            embedder,
            store,
            EchoContextGenerator(),
        )
        assert "ZEBRA-PROTOCOL-17" in answer.answer_text

    def test_scripted_answer_and_k_bound(self, embedder, seeded_store):
        answer = answer_query(
            RagQuery(question="hypertension therapy"),
            RagConfig(k=4),
            embedder,
            seeded_store,
            ScriptedGenerator(["Use ACE inhibitors."]),
        )
        assert answer.answer_text == "Use ACE inhibitors."
        assert len(answer.sources) == min(4, len(seeded_store))

    def test_empty_store_gives_empty_sources(self, embedder):
        answer = answer_query(
            RagQuery(question="anything"),
            RagConfig(),
            embedder,
            VectorStore(),
            ScriptedGenerator(["no sources"]),
        )
        assert answer.sources == []

    def test_generation_error_names_stage_and_keeps_sources(self, embedder, seeded_store):
        with pytest.raises(RagStageError) as excinfo:
            answer_query(
                RagQuery(question="hypertension therapy"),
                RagConfig(),
                embedder,
                seeded_store,
                ScriptedGenerator([]),
            )
        assert excinfo.value.stage == "generate"
        assert len(excinfo.value.sources) == 3

    def test_sources_recomputable(self, embedder, seeded_store):
        query = RagQuery(question="hypertension therapy")
        answer = answer_query(
            query, RagConfig(), embedder, seeded_store, ScriptedGenerator(["ok"])
        )
        query_vector = embedder.embed_text(compose_retrieval_text(query))
        for hit in answer.sources:
            recomputed = cosine_similarity(query_vector, embedder.embed_text(hit.text))
            assert hit.score == pytest.approx(recomputed, abs=1e-9)

    def test_deterministic_modulo_timings(self, embedder, seeded_store):
        def run():
            return answer_query(
                RagQuery(question="hypertension therapy"),
                RagConfig(),
                embedder,
                seeded_store,
                ScriptedGenerator(["same"]),
            )

        first, second = run(), run()
        assert first.answer_text == second.answer_text
        assert first.sources == second.sources
        assert first.prompt_hash == second.prompt_hash
