"""Embedding and generation backends behind the HTTP surface.

Real model backends import their ML stacks lazily so the service (and its
contract tests) can run without them; the ``hash-test`` and ``echo-test``
model names select deterministic offline stand-ins.
"""

from __future__ import annotations

import hashlib
import re
import threading
from typing import Protocol, Sequence

import numpy as np

from .config import ECHO_TEST_GENERATOR, HASH_TEST_EMBED

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class EmbeddingBackend(Protocol):
    name: str
    dimension: int

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class GenerationBackend(Protocol):
    name: str

    def complete(
        self, prompt: str, temperature: float, repetition_penalty: float, max_tokens: int
    ) -> str: ...


class HashTestEmbedding:
    """Deterministic bag-of-tokens embedding, for tests and offline runs."""

    def __init__(self, dimension: int = 384):
        self.name = HASH_TEST_EMBED
        self.dimension = dimension

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dimension), dtype=float)
        for i, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                rows[i, self._bucket(token)] += 1.0
            if not rows[i].any():
                rows[i, :] = 1.0
        return rows


class SentenceTransformerEmbedding:
    """Real sentence-embedding model; one encode at a time."""

    def __init__(self, model_name: str, device: str = "cpu"):
        from sentence_transformers import SentenceTransformer

        self.name = model_name
        self._model = SentenceTransformer(model_name, device=device)
        self.dimension = int(self._model.get_sentence_embedding_dimension())
        self._lock = threading.Lock()

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        with self._lock:
            return np.asarray(
                self._model.encode(list(texts), convert_to_numpy=True, batch_size=32)
            )


class EchoTestGenerator:
    """Deterministic completion stand-in.

    Continues a prompt with words derived from a hash of it, one word per
    requested token, so caps and determinism are testable offline.
    """

    _WORDS = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel")

    def __init__(self):
        self.name = ECHO_TEST_GENERATOR

    def complete(
        self, prompt: str, temperature: float, repetition_penalty: float, max_tokens: int
    ) -> str:
        seed = int.from_bytes(
            hashlib.blake2b(prompt.encode("utf-8"), digest_size=8).digest(), "big"
        )
        words = []
        for i in range(max(0, max_tokens)):
            words.append(self._WORDS[(seed >> (i % 56)) % len(self._WORDS)])
        return " ".join(words)


class CausalLmGenerator:
    """Real causal language model; generation requests are serialized."""

    def __init__(self, model_name: str, device: str = "cpu"):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.name = model_name
        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModelForCausalLM.from_pretrained(model_name).to(device)
        self._device = device
        self._lock = threading.Lock()

    def complete(
        self, prompt: str, temperature: float, repetition_penalty: float, max_tokens: int
    ) -> str:
        import torch

        with self._lock, torch.no_grad():
            inputs = self._tokenizer(prompt, return_tensors="pt").to(self._device)
            output = self._model.generate(
                **inputs,
                do_sample=True,
                temperature=temperature,
                repetition_penalty=repetition_penalty,
                max_new_tokens=max_tokens,
                pad_token_id=self._tokenizer.eos_token_id,
            )
        new_tokens = output[0][inputs["input_ids"].shape[1]:]
        return self._tokenizer.decode(new_tokens, skip_special_tokens=True)


def make_embedding_backend(model_name: str, device: str = "cpu") -> EmbeddingBackend:
    if model_name == HASH_TEST_EMBED:
        return HashTestEmbedding()
    return SentenceTransformerEmbedding(model_name, device=device)


def make_generation_backend(model_name: str, device: str = "cpu") -> GenerationBackend:
    if model_name == ECHO_TEST_GENERATOR:
        return EchoTestGenerator()
    return CausalLmGenerator(model_name, device=device)
