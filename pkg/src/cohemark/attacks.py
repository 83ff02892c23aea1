"""Robustness attacks: remote sentence-wise paraphrasing and embedding noise.

The paraphrase attack rewrites a watermarked paragraph through any completion
endpoint speaking the toolkit wire protocol, using a fixed instruction
template. The embedding-noise attack is its offline stand-in: it perturbs
the sentence embeddings directly and replays detection on them, which lets
robustness curves run at desk scale with no model in the loop.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np
import requests

from .detector import DEFAULT_MIN_SCORED, DetectionResult, replay_memberships, result_from_replay
from .embedder import Embedder
from .errors import EmptyResponse, LmUnavailable
from .fcm import ClusterModel, predict_membership_matrix
from .sampler import GenerationRecord, NsscConfig
from .semantic import MembershipVector, prompt_seed_text, segment_sentences

logger = logging.getLogger(__name__)


def paraphrase_prompt_template() -> str:
    raw = (
        resources.files("cohemark")
        .joinpath("assets/paraphrase_prompt.txt")
        .read_text(encoding="utf-8")
    )
    return raw.rstrip("\n")


@dataclass(frozen=True)
class AttackConfig:
    """Exactly one attack kind's parameters may be populated."""

    kind: str  # "paraphrase_remote" | "embedding_noise"
    noise_sigma: float | None = None
    endpoint: str | None = None
    temperature: float = 0.9
    repetition_penalty: float = 1.05
    max_tokens: int = 512

    def __post_init__(self):
        if self.kind == "embedding_noise":
            if self.noise_sigma is None or not math.isfinite(self.noise_sigma) or self.noise_sigma < 0:
                raise ValueError("embedding_noise requires a finite noise_sigma >= 0")
            if self.endpoint is not None:
                raise ValueError("embedding_noise takes no endpoint")
        elif self.kind == "paraphrase_remote":
            if not self.endpoint:
                raise ValueError("paraphrase_remote requires an endpoint")
            if self.noise_sigma is not None:
                raise ValueError("paraphrase_remote takes no noise_sigma")
        else:
            raise ValueError(f"unknown attack kind {self.kind!r}")


def paraphrase_attack(prefix: str, text: str, cfg: AttackConfig, retries: int = 3) -> str:
    """Rewrite ``text`` sentence by sentence through the remote endpoint.

    The rendered instruction embeds the prefix and paragraph verbatim. The
    attacker never sees the cluster model; detection of the returned
    paragraph happens separately.
    """
    if cfg.kind != "paraphrase_remote":
        raise ValueError("paraphrase_attack requires a paraphrase_remote config")
    if not prefix.strip() or not text.strip():
        raise ValueError("prefix and text must be non-empty")
    rendered = paraphrase_prompt_template().format(prefix, text)
    body = {
        "prompt": rendered,
        "temperature": cfg.temperature,
        "repetition_penalty": cfg.repetition_penalty,
        "max_tokens": cfg.max_tokens,
    }
    last_error: Exception | None = None
    url = cfg.endpoint.rstrip("/")
    for attempt in range(max(1, retries)):
        try:
            response = requests.post(f"{url}/generate", json=body, timeout=120.0)
        except requests.RequestException as exc:
            last_error = exc
            time.sleep(0.2 * 2**attempt)
            continue
        if response.status_code != 200:
            last_error = LmUnavailable(f"paraphraser returned HTTP {response.status_code}")
            if response.status_code >= 500:
                time.sleep(0.2 * 2**attempt)
                continue
            break
        try:
            attacked = str(response.json()["text"])
        except (ValueError, KeyError, TypeError) as exc:
            raise LmUnavailable(f"malformed paraphrase response: {exc}") from exc
        if not attacked.strip():
            raise EmptyResponse("paraphraser returned empty text")
        before = len(segment_sentences(text))
        after = len(segment_sentences(attacked))
        if before != after:
            logger.info("paraphrase changed sentence count %d -> %d", before, after)
        return attacked
    raise LmUnavailable(f"paraphrase request failed: {last_error}")


def perturb_embeddings(
    matrix: np.ndarray, sigma: float, seed: int
) -> np.ndarray:
    """Seeded isotropic Gaussian noise on each row, renormalized to unit norm.

    sigma == 0 returns the input untouched so the no-op attack is bit-exact.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return matrix
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    noisy = matrix + rng.normal(0.0, sigma, size=matrix.shape)
    return noisy / np.linalg.norm(noisy, axis=1, keepdims=True)


def embedding_noise_attack(
    record: GenerationRecord,
    sigma: float,
    seed: int,
    model: ClusterModel,
    nssc: NsscConfig,
    embedder: Embedder,
    threshold: float = 0.5,
    prompt_tail_only: bool = False,
    min_scored: int = DEFAULT_MIN_SCORED,
) -> DetectionResult:
    """Replay detection on noise-perturbed embeddings of a generation.

    Embeds the prompt pseudo-sentence and every recorded sentence, perturbs
    all of them, and feeds the result straight into the rule replay without
    re-embedding any text.
    """
    chain = [prompt_seed_text(record.prompt, tail_only=prompt_tail_only)]
    chain.extend(s.text for s in record.sentences)
    if len(chain) < 2:
        return result_from_replay(0, 0, (), threshold, min_scored)
    matrix = perturb_embeddings(embedder.embed_texts(chain), sigma, seed)
    memberships = [
        MembershipVector(degrees=row) for row in predict_membership_matrix(model, matrix)
    ]
    hits, scored, trace = replay_memberships(memberships, nssc)
    return result_from_replay(hits, scored, trace, threshold, min_scored)


@dataclass(frozen=True)
class AttackRow:
    text_id: str
    kind: str
    sigma_or_model: str
    r_before: float
    r_after: float


def write_attack_csv(rows: Sequence[AttackRow], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["text_id", "kind", "sigma_or_model", "r_before", "r_after"])
        for row in rows:
            writer.writerow(
                [row.text_id, row.kind, row.sigma_or_model, repr(row.r_before), repr(row.r_after)]
            )
