"""FastAPI application exposing /embed, /generate and /healthz.

The embedding backend loads at startup, fixing the reported dimension for
the process lifetime; vectors are L2-normalized server-side so clients never
renormalize. The generation backend loads lazily in the background, and
/generate answers 503 until it is ready.
"""

from __future__ import annotations

import logging
import threading
from typing import Any, Callable

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backends import (
    EmbeddingBackend,
    GenerationBackend,
    make_embedding_backend,
    make_generation_backend,
)
from .config import SidecarConfig

logger = logging.getLogger(__name__)


class _LazyGenerator:
    """Loads the generation backend on first use, off the request thread."""

    def __init__(self, factory: Callable[[], GenerationBackend]):
        self._factory = factory
        self._backend: GenerationBackend | None = None
        self._error: Exception | None = None
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None

    def _load(self) -> None:
        try:
            backend = self._factory()
        except Exception as exc:  # surfaced as 500 on the next request
            self._error = exc
            return
        self._backend = backend

    def get(self) -> GenerationBackend | None:
        """The backend if ready; kicks off loading otherwise."""
        if self._backend is not None:
            return self._backend
        if self._error is not None:
            raise self._error
        with self._lock:
            if self._thread is None:
                self._thread = threading.Thread(target=self._load, daemon=True)
                self._thread.start()
        return self._backend


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    config: SidecarConfig,
    embedding_backend: EmbeddingBackend | None = None,
    generation_factory: Callable[[], GenerationBackend] | None = None,
) -> FastAPI:
    app = FastAPI(title="cohemark-sidecar")
    embedder = embedding_backend or make_embedding_backend(config.embed_model, config.device)
    generator = _LazyGenerator(
        generation_factory
        or (lambda: make_generation_backend(config.generation_model, config.device))
    )

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"status": "ok", "embed_dim": embedder.dimension}

    @app.post("/embed")
    async def embed(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        texts = body.get("texts")
        if not isinstance(texts, list) or not texts:
            return _error(400, "texts must be a non-empty array")
        if not all(isinstance(t, str) for t in texts):
            return _error(400, "texts must all be strings")
        if any(len(t) > config.max_text_chars for t in texts):
            return _error(400, f"texts are capped at {config.max_text_chars} characters")
        if len(texts) > config.max_batch_size:
            return _error(413, f"batch size is capped at {config.max_batch_size}")
        try:
            raw = np.asarray(embedder.encode(texts), dtype=float)
            norms = np.linalg.norm(raw, axis=1, keepdims=True)
            if not np.all(norms > 0):
                raise ValueError("backend produced a zero vector")
            unit = raw / norms
        except Exception as exc:
            logger.exception("embedding failed")
            return _error(500, f"embedding failed: {exc}")
        return {
            "embeddings": [[float(v) for v in row] for row in unit],
            "dimension": embedder.dimension,
            "model": embedder.name,
        }

    @app.post("/generate")
    async def generate(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        prompt = body.get("prompt")
        if not isinstance(prompt, str) or not prompt:
            return _error(400, "prompt is required")
        try:
            temperature = float(body.get("temperature", 0.9))
            repetition_penalty = float(body.get("repetition_penalty", 1.05))
            max_tokens = int(body.get("max_tokens", 255))
        except (TypeError, ValueError):
            return _error(400, "sampling parameters must be numeric")
        if temperature <= 0 or max_tokens < 1:
            return _error(400, "temperature must be > 0 and max_tokens >= 1")
        try:
            backend = generator.get()
        except Exception as exc:
            logger.exception("generation backend failed to load")
            return _error(500, f"generation backend failed to load: {exc}")
        if backend is None:
            return _error(503, "generation model is loading")
        try:
            text = backend.complete(prompt, temperature, repetition_penalty, max_tokens)
        except Exception as exc:
            logger.exception("generation failed")
            return _error(500, f"generation failed: {exc}")
        return {
            "text": text,
            "model": backend.name,
            "temperature": temperature,
            "repetition_penalty": repetition_penalty,
        }

    return app
