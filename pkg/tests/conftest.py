import datetime as dt

import pytest

from clinrag.backends import HashEmbedder
from clinrag.fhir import assemble_bundle
from clinrag.ingest import IngestConfig, SourceDocument, build_index
from clinrag.mockfhir import make_condition, make_observation, make_patient
from clinrag.store import VectorStore

REFERENCE_DATE = dt.date(2024, 6, 1)


@pytest.fixture
def embedder():
    return HashEmbedder()


@pytest.fixture
def seeded_store(embedder):
    """Three-document store built through the real ingest path."""
    docs = [
        SourceDocument(
            "htn/ace.txt", "htn/ace.txt", "htn",
            "ACE inhibitors are first-line therapy for hypertension in adults under 55.",
        ),
        SourceDocument(
            "htn/ccb.txt", "htn/ccb.txt", "htn",
            "Calcium channel blockers suit older adults with isolated systolic hypertension.",
        ),
        SourceDocument(
            "copd/laba.txt", "copd/laba.txt", "copd",
            "Long-acting bronchodilators reduce exacerbation frequency in stable COPD.",
        ),
    ]
    store = VectorStore()
    build_index(docs, IngestConfig(), embedder, store)
    return store


@pytest.fixture
def patient_bundle():
    patient = make_patient("pat-1", "1939-03-01", "female", "Maria Example")
    condition = make_condition("cond-1", "pat-1", "Hypertension", "2020-05-10")
    observation = make_observation(
        "obs-1", "pat-1", "Systolic blood pressure", 142, "mmHg", "2024-05-01T09:00:00Z"
    )
    return assemble_bundle([patient, condition, observation], fetched_at="2024-06-01T00:00:00Z")
