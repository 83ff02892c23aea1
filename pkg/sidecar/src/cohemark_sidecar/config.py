"""Sidecar configuration."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_EMBED_MODEL = "sentence-transformers/all-MiniLM-L6-v2"
DEFAULT_GENERATION_MODEL = "distilgpt2"

# Sentinel model names selecting the deterministic offline backends.
HASH_TEST_EMBED = "hash-test"
ECHO_TEST_GENERATOR = "echo-test"


@dataclass(frozen=True)
class SidecarConfig:
    embed_model: str = DEFAULT_EMBED_MODEL
    generation_model: str = DEFAULT_GENERATION_MODEL
    host: str = "127.0.0.1"
    port: int = 8900
    max_batch_size: int = 128
    max_text_chars: int = 2048
    device: str = "cpu"

    def __post_init__(self):
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")
        if self.max_text_chars < 1:
            raise ValueError("max_text_chars must be >= 1")
