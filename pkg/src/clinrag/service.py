"""HTTP surface: health, bundle interpretation, guideline query, feedback
capture and patient summaries.

Routes are registered both at the root and under /v1. The index is opened
read-only and shared across requests; feedback appends to a JSONL file
behind a lock.
"""

from __future__ import annotations

import datetime as dt
import json
import threading
import time
from pathlib import Path
from typing import Literal

from fastapi import APIRouter, Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .backends import BackendError, Embedder, Generator
from .config import ServiceConfig, build_embedder, build_generator, load_config
from .engine import RagConfig, RagQuery, RagStageError, answer_query
from .fhir import FhirClient, FhirError, PatientBundle, PatientNotFoundError
from .store import StoreFormatError, VectorStore
from .summarize import MedicalSummary, summarize_llm, summarize_template


class FeedbackStore:
    """Append-only JSONL capture of clinician ratings and comments."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        with self._lock:
            return [
                json.loads(line)
                for line in self.path.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]


class InterpretRequest(BaseModel):
    bundle: dict
    mode: Literal["llm", "template"] = "template"


class QueryRequest(BaseModel):
    question: str = Field(min_length=1)
    patient_id: str | None = None
    bundle: dict | None = None
    summary: str | None = None
    k: int | None = Field(default=None, ge=1)
    guideline_tag: str | None = None


class FeedbackRequest(BaseModel):
    prompt_hash: str
    question: str
    rater_id: str
    score: int = Field(ge=1, le=5)
    comment: str | None = None


def create_app(
    config: ServiceConfig,
    store: VectorStore,
    embedder: Embedder,
    generator: Generator,
    fhir_client: FhirClient | None = None,
) -> FastAPI:
    app = FastAPI(title="guideline decision support", version="1")
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )
    feedback = FeedbackStore(config.feedback_path)
    app.state.feedback = feedback

    def require_auth(request: Request) -> None:
        if config.api_bearer_token is None:
            return
        header = request.headers.get("Authorization", "")
        if header != f"Bearer {config.api_bearer_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    router = APIRouter()

    @router.get("/health")
    def health() -> dict:
        return {"status": "ok", "chunks": len(store)}

    def _summarize(bundle: PatientBundle, mode: str) -> dict:
        reference_date = dt.date.today()
        try:
            if mode == "llm":
                summary = summarize_llm(bundle, generator, reference_date)
            else:
                summary = summarize_template(bundle, reference_date)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except BackendError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return {
            "summary": summary.text,
            "generated_by": summary.generated_by,
            "source_resource_ids": summary.source_resource_ids,
        }

    @router.post("/interpret", dependencies=[Depends(require_auth)])
    def interpret(body: InterpretRequest) -> dict:
        try:
            bundle = PatientBundle.from_fhir_json(body.bundle)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return _summarize(bundle, body.mode)

    def _patient_bundle(patient_id: str) -> PatientBundle:
        if fhir_client is None:
            raise HTTPException(status_code=503, detail="no FHIR server configured")
        try:
            return fhir_client.fetch_patient_context(patient_id)
        except PatientNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except FhirError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc

    @router.post("/query", dependencies=[Depends(require_auth)])
    def query(body: QueryRequest) -> dict:
        summary = None
        summary_text = (body.summary or "").strip()
        if summary_text:
            summary = MedicalSummary(text=summary_text, generated_by="template")
        elif body.bundle is not None:
            try:
                bundle = PatientBundle.from_fhir_json(body.bundle)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            payload = _summarize(bundle, config.summary_mode)
            summary = MedicalSummary(text=payload["summary"], generated_by=payload["generated_by"])
        elif body.patient_id:
            bundle = _patient_bundle(body.patient_id)
            payload = _summarize(bundle, config.summary_mode)
            summary = MedicalSummary(text=payload["summary"], generated_by=payload["generated_by"])

        rag = config.rag if body.k is None else RagConfig(
            k=body.k,
            context_delimiters=config.rag.context_delimiters,
            max_context_chars=config.rag.max_context_chars,
        )
        try:
            answer = answer_query(
                RagQuery(
                    question=body.question,
                    summary=summary,
                    guideline_filter=body.guideline_tag,
                ),
                rag,
                embedder,
                store,
                generator,
            )
        except RagStageError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return {
            "answer": answer.answer_text,
            "sources": [
                {
                    "chunk_id": hit.chunk_id,
                    "score": hit.score,
                    "text": hit.text,
                    "doc_id": hit.doc_id,
                }
                for hit in answer.sources
            ],
            "summary_used": answer.summary_used,
            "prompt_hash": answer.prompt_hash,
        }

    @router.post("/feedback", status_code=201, dependencies=[Depends(require_auth)])
    def submit_feedback(body: FeedbackRequest) -> dict:
        record = {
            "prompt_hash": body.prompt_hash,
            "question": body.question,
            "rater_id": body.rater_id,
            "score": body.score,
            "comment": body.comment,
            "timestamp": time.time(),
        }
        feedback.append(record)
        return {"status": "recorded"}

    @router.get("/patients/{patient_id}/summary", dependencies=[Depends(require_auth)])
    def patient_summary(patient_id: str, mode: str | None = None) -> dict:
        bundle = _patient_bundle(patient_id)
        payload = _summarize(bundle, mode or config.summary_mode)
        payload["patient_id"] = patient_id
        return payload

    app.include_router(router)
    app.include_router(router, prefix="/v1")
    return app


def build_service(config: ServiceConfig) -> FastAPI:
    """Load the index and backends named by the config and assemble the app."""
    index_path = Path(config.index_path)
    try:
        store = VectorStore.load(index_path)
    except StoreFormatError as exc:
        raise SystemExit(
            f"cannot start: {exc}. Build an index first, e.g. "
            f"`clinrag ingest --corpus GUIDELINE_DIR --index {index_path}`."
        ) from exc
    embedder = build_embedder(config)
    generator = build_generator(config.generator_spec, config.backend)
    fhir_client = FhirClient(config.fhir) if config.fhir else None
    return create_app(config, store, embedder, generator, fhir_client)


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = build_service(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
