"""Embedding and generation backends.

Two families: remote HTTP clients speaking the local-model-server JSON
protocol (``/api/embeddings`` and ``/api/generate``), and deterministic
in-process implementations so every pipeline stage can run hermetically.
"""

from __future__ import annotations

import math
import os
import threading
import zlib
from dataclasses import dataclass, field
from typing import Protocol, Sequence
from urllib.parse import urlparse

import httpx
import numpy as np

HASH_DIM = 256
HASH_MODEL_ID = "det-3gram-v1"
DEFAULT_BASE_URL = "http://localhost:11434"
DEFAULT_EMBED_MODEL = "mx-bai-embed-large"
DEFAULT_GEN_MODEL = "llama3.1:8b"


class BackendError(Exception):
    """A model backend failed; ``status`` carries the last HTTP status if any."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int
    model_id: str

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise ValueError(f"vector has {len(self.values)} values, declared dim {self.dim}")
        if not np.isfinite(np.asarray(self.values, dtype=np.float64)).all():
            raise ValueError("vector contains non-finite values")


@dataclass(frozen=True)
class GenerationParams:
    model_id: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024
    stop: tuple[str, ...] | None = None


@dataclass
class BackendConfig:
    base_url: str = DEFAULT_BASE_URL
    embed_model_id: str = DEFAULT_EMBED_MODEL
    gen_model_id: str = DEFAULT_GEN_MODEL
    timeout: float = 60.0
    retries: int = 2

    def __post_init__(self):
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"base_url is not a well-formed http(s) URL: {self.base_url!r}")

    @classmethod
    def from_env(cls, **overrides) -> "BackendConfig":
        values = {
            "base_url": os.environ.get("LLM_BASE_URL", DEFAULT_BASE_URL),
            "embed_model_id": os.environ.get("EMBED_MODEL", DEFAULT_EMBED_MODEL),
            "gen_model_id": os.environ.get("GEN_MODEL", DEFAULT_GEN_MODEL),
        }
        values.update(overrides)
        return cls(**values)


class Embedder(Protocol):
    model_id: str

    def embed_text(self, text: str) -> EmbeddingVector: ...

    def embed_tokens(self, tokens: Sequence[str]) -> list[EmbeddingVector]: ...


class Generator(Protocol):
    def generate(self, prompt: str, params: GenerationParams | None = None) -> str: ...


class HashEmbedder:
    """Deterministic character-3-gram embedder.

    Each 3-gram is hashed into one of 256 count buckets and the counts are
    L2-normalized, so lexically similar texts land near each other under
    cosine similarity without any model weights.
    """

    dim = HASH_DIM
    model_id = HASH_MODEL_ID

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise ValueError("cannot embed empty text")
        return self._profile(text)

    def embed_tokens(self, tokens: Sequence[str]) -> list[EmbeddingVector]:
        if not tokens:
            raise ValueError("cannot embed an empty token list")
        return [self._profile(token) for token in tokens]

    @staticmethod
    def _profile(text: str) -> EmbeddingVector:
        # Inputs shorter than one 3-gram are padded with "_".
        if len(text) < 3:
            text = text + "_" * (3 - len(text))
        counts = [0.0] * HASH_DIM
        for i in range(len(text) - 2):
            gram = text[i : i + 3]
            counts[zlib.crc32(gram.encode("utf-8")) % HASH_DIM] += 1.0
        norm = math.sqrt(sum(c * c for c in counts))
        values = tuple(c / norm for c in counts)
        return EmbeddingVector(values=values, dim=HASH_DIM, model_id=HASH_MODEL_ID)


class _RemoteBase:
    def __init__(self, config: BackendConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout)

    def _post(self, path: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        last_error: BackendError | None = None
        for _ in range(self.config.retries + 1):
            try:
                response = self._client.post(url, json=payload)
            except httpx.HTTPError as exc:
                last_error = BackendError(f"request to {url} failed: {exc}")
                continue
            if response.status_code == 200:
                try:
                    return response.json()
                except ValueError as exc:
                    last_error = BackendError(f"invalid JSON from {url}: {exc}", status=200)
                    continue
            last_error = BackendError(
                f"request to {url} failed with HTTP {response.status_code}",
                status=response.status_code,
            )
        assert last_error is not None
        raise last_error


class RemoteEmbedder(_RemoteBase):
    """Embedding client for a local model server's ``/api/embeddings``."""

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None):
        super().__init__(config, client)
        self.model_id = config.embed_model_id
        self._dim: int | None = None

    @property
    def dim(self) -> int | None:
        return self._dim

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise ValueError("cannot embed empty text")
        data = self._post("/api/embeddings", {"model": self.model_id, "prompt": text})
        values = tuple(float(x) for x in data.get("embedding", ()))
        if not values:
            raise BackendError("embedding response carried no vector")
        if self._dim is None:
            self._dim = len(values)
        elif len(values) != self._dim:
            raise BackendError(f"embedding dim changed from {self._dim} to {len(values)}")
        return EmbeddingVector(values=values, dim=len(values), model_id=self.model_id)

    def embed_tokens(self, tokens: Sequence[str]) -> list[EmbeddingVector]:
        if not tokens:
            raise ValueError("cannot embed an empty token list")
        return [self.embed_text(token if token.strip() else "_") for token in tokens]


class RemoteGenerator(_RemoteBase):
    """Completion client for a local model server's ``/api/generate``."""

    def generate(self, prompt: str, params: GenerationParams | None = None) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        params = params or GenerationParams()
        options: dict = {"temperature": params.temperature}
        if params.max_tokens:
            options["num_predict"] = params.max_tokens
        if params.stop:
            options["stop"] = list(params.stop)
        payload = {
            "model": params.model_id or self.config.gen_model_id,
            "prompt": prompt,
            "stream": False,
            "options": options,
        }
        data = self._post("/api/generate", payload)
        return str(data.get("response", ""))


class ScriptedGenerator:
    """Returns queued canned responses in order; exhausting the queue is an error."""

    def __init__(self, responses: Sequence[str]):
        self._queue = list(responses)
        self._lock = threading.Lock()

    def generate(self, prompt: str, params: GenerationParams | None = None) -> str:
        with self._lock:
            if not self._queue:
                raise BackendError("scripted response queue exhausted")
            return self._queue.pop(0)


class EchoContextGenerator:
    """Returns whatever sits between the context delimiters in the prompt."""

    def __init__(self, open_delim: str = "<CTX>", close_delim: str = "</CTX>"):
        self.open_delim = open_delim
        self.close_delim = close_delim

    def generate(self, prompt: str, params: GenerationParams | None = None) -> str:
        start = prompt.find(self.open_delim)
        end = prompt.rfind(self.close_delim)
        if start == -1 or end == -1 or end <= start:
            return ""
        return prompt[start + len(self.open_delim) : end].strip()


class TemplateJudgeGenerator:
    """Emits rubric-judge shaped output with scripted scores."""

    def __init__(self, scores: Sequence[int]):
        self._queue = list(scores)
        self._lock = threading.Lock()

    def generate(self, prompt: str, params: GenerationParams | None = None) -> str:
        with self._lock:
            if not self._queue:
                raise BackendError("scripted judge score queue exhausted")
            score = self._queue.pop(0)
        return f"Feedback: ok [RESULT] {score}"
