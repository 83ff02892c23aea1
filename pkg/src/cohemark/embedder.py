"""Sentence embedding backends.

Two interchangeable backends map sentences to unit-norm vectors: a
deterministic token-hashing embedder that needs no network or models, and a
client for a remote embedding service. A backend's identity string fully
determines its output, so models can verify at prediction time that they are
fed vectors from the embedder they were trained with.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np
import requests

from .errors import DimensionMismatch, RemoteUnavailable
from .semantic import EmbeddingVector, Sentence

DEFAULT_DIMENSION = 64
DEFAULT_HASH_SEED = 0x0C0FFEE5EED
MAX_REMOTE_BATCH = 128

_TOKEN_RE = re.compile(r"[0-9a-z]+")


@dataclass(frozen=True)
class EmbedderSpec:
    """Fingerprint of an embedding backend.

    Two embedders with equal identity produce equal vectors for equal input.
    """

    kind: str  # "hash" | "remote"
    dimension: int
    identity: str

    def __post_init__(self):
        if self.kind not in ("hash", "remote"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.identity:
            raise ValueError("identity must be non-empty")


class Embedder(Protocol):
    """Anything that can turn raw sentence texts into unit-norm row vectors."""

    @property
    def spec(self) -> EmbedderSpec: ...

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic bag-of-tokens embedder.

    Lowercases, splits on non-alphanumerics, hashes every token into one of
    ``dimension`` buckets with a keyed 64-bit hash, accumulates counts and
    L2-normalizes. Sentences sharing vocabulary land close together, which is
    enough structure to drive clustering and sampling without any ML stack.
    Sentences with no tokens at all embed as the normalized all-ones vector
    so no input ever produces a zero vector.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = DEFAULT_HASH_SEED):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self._dimension = int(dimension)
        self._seed = int(seed)
        self._key = (self._seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
        self._spec = EmbedderSpec(
            kind="hash",
            dimension=self._dimension,
            identity=f"hash:d={self._dimension}:seed={self._seed:#x}",
        )

    @property
    def spec(self) -> EmbedderSpec:
        return self._spec

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "big") % self._dimension

    def embed_text(self, text: str) -> np.ndarray:
        counts = np.zeros(self._dimension, dtype=float)
        for token in _TOKEN_RE.findall(text.lower()):
            counts[self._bucket(token)] += 1.0
        if not counts.any():
            counts[:] = 1.0
        return counts / np.linalg.norm(counts)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            return np.zeros((0, self._dimension), dtype=float)
        return np.stack([self.embed_text(t) for t in texts])


class RemoteEmbedder:
    """Client for an embedding service speaking the toolkit wire protocol.

    POST ``{url}/embed`` with ``{"texts": [...]}`` and expect
    ``{"embeddings": [[...]...], "dimension": d, "model": name}``. Batches are
    capped at MAX_REMOTE_BATCH texts per request. The backend's dimension and
    model name are resolved from the first successful response and pinned for
    the client's lifetime; any later disagreement is a configuration bug.
    """

    def __init__(
        self,
        url: str,
        dimension: int | None = None,
        timeout: float = 30.0,
        retries: int = 3,
    ):
        self._url = url.rstrip("/")
        self._dimension = dimension
        self._model: str | None = None
        self._timeout = timeout
        self._retries = max(1, retries)

    @property
    def spec(self) -> EmbedderSpec:
        if self._dimension is None or self._model is None:
            self.resolve()
        return EmbedderSpec(
            kind="remote",
            dimension=self._dimension,
            identity=f"remote:d={self._dimension}:model={self._model}",
        )

    def resolve(self) -> EmbedderSpec:
        """Issue a probe request to pin the backend's dimension and model."""
        self._request(["identity probe"])
        return self.spec

    def _request(self, texts: list[str]) -> list[list[float]]:
        last_error: Exception | None = None
        for attempt in range(self._retries):
            try:
                response = requests.post(
                    f"{self._url}/embed",
                    json={"texts": texts},
                    timeout=self._timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                time.sleep(0.2 * 2**attempt)
                continue
            if response.status_code != 200:
                last_error = RemoteUnavailable(
                    f"embed endpoint returned HTTP {response.status_code}"
                )
                if response.status_code >= 500:
                    time.sleep(0.2 * 2**attempt)
                    continue
                break
            try:
                payload = response.json()
                embeddings = payload["embeddings"]
                dimension = int(payload["dimension"])
                model = str(payload["model"])
            except (ValueError, KeyError, TypeError) as exc:
                raise RemoteUnavailable(f"malformed embed response: {exc}") from exc
            if len(embeddings) != len(texts):
                raise RemoteUnavailable(
                    f"embed response has {len(embeddings)} rows for {len(texts)} texts"
                )
            if self._dimension is None:
                self._dimension = dimension
            if self._model is None:
                self._model = model
            if dimension != self._dimension or any(len(row) != self._dimension for row in embeddings):
                raise DimensionMismatch(
                    f"remote returned width {dimension}, expected {self._dimension}"
                )
            return embeddings
        raise RemoteUnavailable(f"embed request failed: {last_error}")

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        rows: list[list[float]] = []
        for start in range(0, len(texts), MAX_REMOTE_BATCH):
            rows.extend(self._request(list(texts[start : start + MAX_REMOTE_BATCH])))
        if not rows:
            return np.zeros((0, self._dimension or 0), dtype=float)
        return np.asarray(rows, dtype=float)


def embed(embedder: Embedder, sentences: Iterable[Sentence | str]) -> list[EmbeddingVector]:
    """Embed sentences (or raw strings) in order, one unit-norm vector each."""
    texts = [s.text if isinstance(s, Sentence) else s for s in sentences]
    for text in texts:
        if not text.strip():
            raise ValueError("cannot embed an empty sentence")
    matrix = embedder.embed_texts(texts)
    return [EmbeddingVector(values=row) for row in matrix]


def embedder_from_identity(
    identity: str,
    embed_url: str | None = None,
    timeout: float = 30.0,
) -> Embedder:
    """Reconstruct the embedder a model was trained with from its identity string.

    Hash identities are self-contained. Remote identities need the endpoint
    URL; the resolved backend must report the same dimension and model name.
    """
    if identity.startswith("hash:"):
        fields = dict(part.split("=", 1) for part in identity.split(":")[1:])
        return HashEmbedder(dimension=int(fields["d"]), seed=int(fields["seed"], 16))
    if identity.startswith("remote:"):
        if embed_url is None:
            raise ValueError("remote embedder identity requires an embed URL")
        remote = RemoteEmbedder(embed_url, timeout=timeout)
        resolved = remote.resolve()
        if resolved.identity != identity:
            raise RemoteUnavailable(
                f"endpoint identity {resolved.identity!r} does not match model "
                f"identity {identity!r}"
            )
        return remote
    raise ValueError(f"unrecognized embedder identity {identity!r}")


def identity_fingerprint(spec: EmbedderSpec) -> str:
    """Stable JSON fingerprint of a spec, handy for manifests."""
    return json.dumps(
        {"kind": spec.kind, "dimension": spec.dimension, "identity": spec.identity},
        sort_keys=True,
    )
