"""Service configuration: one JSON file, environment overrides, and backend
factories shared by the CLI and the HTTP service."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .backends import (
    BackendConfig,
    EchoContextGenerator,
    Embedder,
    Generator,
    HashEmbedder,
    RemoteEmbedder,
    RemoteGenerator,
    ScriptedGenerator,
    TemplateJudgeGenerator,
)
from .engine import RagConfig
from .fhir import SmartConfig
from .ingest import IngestConfig


class ConfigError(Exception):
    pass


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    index_path: str = "index"
    backend: BackendConfig = field(default_factory=BackendConfig)
    embedder_spec: dict = field(default_factory=lambda: {"kind": "remote"})
    generator_spec: dict = field(default_factory=lambda: {"kind": "remote"})
    judge_spec: dict | None = None
    ragas_judge_spec: dict | None = None
    fhir: SmartConfig | None = None
    rag: RagConfig = field(default_factory=RagConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    api_bearer_token: str | None = None
    feedback_path: str = "feedback.jsonl"
    cors_origins: list[str] = field(default_factory=list)
    summary_mode: str = "template"  # "template" | "llm"


def _backend_from(data: dict) -> BackendConfig:
    defaults = BackendConfig()
    return BackendConfig(
        base_url=os.environ.get("LLM_BASE_URL", data.get("base_url", defaults.base_url)),
        embed_model_id=os.environ.get("EMBED_MODEL", data.get("embed_model", defaults.embed_model_id)),
        gen_model_id=os.environ.get("GEN_MODEL", data.get("gen_model", defaults.gen_model_id)),
        timeout=float(data.get("timeout", 60.0)),
        retries=int(data.get("retries", 2)),
    )


def _fhir_from(data: dict | None) -> SmartConfig | None:
    env_base = os.environ.get("FHIR_BASE_URL")
    if not data and not env_base:
        return None
    data = dict(data or {})
    base_url = env_base or data.get("base_url")
    if not base_url:
        return None
    return SmartConfig(
        fhir_base_url=base_url,
        auth_mode=data.get("auth_mode", "static_bearer"),
        client_id=os.environ.get("SMART_CLIENT_ID", data.get("client_id", "")),
        client_secret=os.environ.get("SMART_CLIENT_SECRET", data.get("client_secret")),
        scopes=tuple(data.get("scopes", ("patient/*.read",))),
        token_url=data.get("token_url"),
        authorize_url=data.get("authorize_url"),
        static_token=data.get("token", data.get("static_token", "unused")),
    )


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Build the service configuration from a JSON file plus env overrides
    (LLM_BASE_URL, EMBED_MODEL, GEN_MODEL, FHIR_BASE_URL, SMART_CLIENT_ID,
    SMART_CLIENT_SECRET, API_BEARER_TOKEN)."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc

    listen = data.get("listen", {})
    return ServiceConfig(
        host=listen.get("host", data.get("host", "127.0.0.1")),
        port=int(listen.get("port", data.get("port", 8000))),
        index_path=data.get("index_path", "index"),
        backend=_backend_from(data.get("backend", {})),
        embedder_spec=data.get("embedder", {"kind": "remote"}),
        generator_spec=data.get("generator", {"kind": "remote"}),
        judge_spec=data.get("judge"),
        ragas_judge_spec=data.get("ragas_judge"),
        fhir=_fhir_from(data.get("fhir")),
        rag=RagConfig(
            k=int(data.get("rag", {}).get("k", RagConfig().k)),
            max_context_chars=int(
                data.get("rag", {}).get("max_context_chars", RagConfig().max_context_chars)
            ),
        ),
        ingest=IngestConfig.from_dict(data.get("ingest", {})),
        api_bearer_token=os.environ.get("API_BEARER_TOKEN", data.get("api_bearer_token")),
        feedback_path=data.get("feedback_path", "feedback.jsonl"),
        cors_origins=list(data.get("cors_origins", [])),
        summary_mode=data.get("summary_mode", "template"),
    )


def build_embedder(config: ServiceConfig) -> Embedder:
    kind = config.embedder_spec.get("kind", "remote")
    if kind == "hash":
        return HashEmbedder()
    if kind == "remote":
        return RemoteEmbedder(config.backend)
    raise ConfigError(f"unknown embedder kind {kind!r}")


def build_generator(spec: dict | None, backend: BackendConfig) -> Generator:
    spec = spec or {"kind": "remote"}
    kind = spec.get("kind", "remote")
    if kind == "remote":
        return RemoteGenerator(backend)
    if kind == "echo":
        open_delim, close_delim = spec.get("delimiters", ("<CTX>", "</CTX>"))
        return EchoContextGenerator(open_delim, close_delim)
    if kind == "scripted":
        return ScriptedGenerator(spec.get("responses", []))
    if kind == "template_judge":
        return TemplateJudgeGenerator(spec.get("scores", []))
    raise ConfigError(f"unknown generator kind {kind!r}")
