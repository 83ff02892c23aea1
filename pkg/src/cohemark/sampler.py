"""Cohesion-guided rejection sampling of watermarked sentences.

The previous sentence's membership ranking decides which clusters are "green"
for the next sentence; candidates are drawn from a language-model backend
until one's primary cluster lands in the green set. Two rank rules alternate:
the usual one keeps the text near the preceding sentence's themes, and a
pivot rule fires for exactly one sentence after enough consecutive
primary-cluster matches, steering the text toward fresher themes.
"""

from __future__ import annotations

import enum
import hashlib
import time
from dataclasses import dataclass, replace
from typing import Any, Protocol, Sequence

import numpy as np
import requests

from .embedder import Embedder, HashEmbedder
from .errors import (
    DimensionMismatch,
    EmbedderMismatch,
    GenerationFailure,
    LmUnavailable,
    RankOutOfRange,
)
from .fcm import ClusterModel, predict_membership
from .semantic import (
    EmbeddingVector,
    MembershipIndex,
    membership_index,
    primary_cluster,
    prompt_seed_text,
    segment_sentences,
)

TERMINALS = ".!?"


class Mode(str, enum.Enum):
    """Which rank rule is in force for the next sentence."""

    V1 = "v1"
    V2 = "v2"


class Outcome(str, enum.Enum):
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass(frozen=True)
class NsscConfig:
    """Rank positions that count as green under each rule, plus the pivot budget."""

    v1_green_ranks: frozenset[int] = frozenset({0, 2})
    v2_green_ranks: frozenset[int] = frozenset({1, 3, 4, 5})
    match_budget: int = 5

    def __post_init__(self):
        for name, ranks in (("v1", self.v1_green_ranks), ("v2", self.v2_green_ranks)):
            if not ranks:
                raise ValueError(f"{name} green ranks must be non-empty")
            if any(r < 0 for r in ranks):
                raise ValueError(f"{name} green ranks must be >= 0")
        if self.match_budget < 1:
            raise ValueError("match_budget must be >= 1")

    def ranks_for(self, mode: Mode) -> frozenset[int]:
        return self.v1_green_ranks if mode is Mode.V1 else self.v2_green_ranks


@dataclass(frozen=True)
class SamplerState:
    """Current rule plus the running count of consecutive-sentence matches."""

    mode: Mode = Mode.V1
    match_counter: int = 0

    def __post_init__(self):
        if self.match_counter < 0:
            raise ValueError("match_counter must be >= 0")


INITIAL_STATE = SamplerState(Mode.V1, 0)


@dataclass(frozen=True)
class GenerationConfig:
    """Sampling budget and decoding parameters for one generation."""

    max_sentences: int
    max_trials_per_sentence: int = 50
    temperature: float = 0.9
    repetition_penalty: float = 1.05
    max_total_trials: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_sentences < 1:
            raise ValueError("max_sentences must be >= 1")
        if self.max_trials_per_sentence < 1:
            raise ValueError("max_trials_per_sentence must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.max_total_trials is None:
            object.__setattr__(self, "max_total_trials", 16 * self.max_sentences)
        if self.max_total_trials < 1:
            raise ValueError("max_total_trials must be >= 1")


@dataclass(frozen=True)
class SentenceDraw:
    """One accepted sentence with the context that accepted it."""

    text: str
    trials: int
    green: tuple[int, ...]
    mode: Mode
    primary: int


@dataclass(frozen=True)
class GenerationRecord:
    """Everything needed to audit or replay one generation."""

    prompt: str
    sentences: tuple[SentenceDraw, ...]
    outcome: Outcome
    failure_reason: str | None = None

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "prompt": self.prompt,
            "text": self.text,
            "outcome": self.outcome.value,
            "failure_reason": self.failure_reason,
            "sentences": [
                {
                    "text": s.text,
                    "trials": s.trials,
                    "green": list(s.green),
                    "mode": s.mode.value,
                    "primary": s.primary,
                }
                for s in self.sentences
            ],
        }

    @classmethod
    def from_json_dict(cls, payload: dict[str, Any]) -> "GenerationRecord":
        return cls(
            prompt=payload["prompt"],
            sentences=tuple(
                SentenceDraw(
                    text=s["text"],
                    trials=int(s["trials"]),
                    green=tuple(int(g) for g in s["green"]),
                    mode=Mode(s["mode"]),
                    primary=int(s["primary"]),
                )
                for s in payload["sentences"]
            ),
            outcome=Outcome(payload["outcome"]),
            failure_reason=payload.get("failure_reason"),
        )


def green_spaces(prev_mi: MembershipIndex, mode: Mode, nssc: NsscConfig) -> frozenset[int]:
    """Clusters the next sentence's primary cluster may land in.

    The complement of the returned set is blocked. Raises RankOutOfRange when
    the configured ranks do not exist for this cluster count.
    """
    ranks = nssc.ranks_for(mode)
    k = prev_mi.cluster_count
    if max(ranks) >= k:
        raise RankOutOfRange(
            f"rank {max(ranks)} configured for mode {mode.value} but only {k} clusters exist"
        )
    return frozenset(prev_mi.ranking[r] for r in ranks)


def advance_state(
    state: SamplerState,
    prev_primary: int,
    accepted_primary: int,
    nssc: NsscConfig,
) -> SamplerState:
    """Fold one accepted sentence into the switching-rule state machine.

    The pivot rule applies for exactly one sentence, then everything resets.
    Consecutive primary-cluster matches accumulate; hitting the budget arms
    the pivot for the next sentence.
    """
    if state.mode is Mode.V2:
        return SamplerState(Mode.V1, 0)
    if prev_primary == accepted_primary:
        counter = state.match_counter + 1
        if counter >= nssc.match_budget:
            return SamplerState(Mode.V2, 0)
        return SamplerState(Mode.V1, counter)
    return state


class LmBackend(Protocol):
    """One-sentence-at-a-time language model surface.

    ``sample_sentence`` returns ``(text, end_of_text)``; the nonce is derived
    from the generation seed, so backends that honor it are fully replayable.
    """

    def sample_sentence(
        self, context: str, temperature: float, repetition_penalty: float, nonce: int
    ) -> tuple[str, bool]: ...


class CorpusMockLm:
    """Offline stand-in drawing sentences from a fixed pool.

    With similarity weighting on, draws favor sentences whose hash embedding
    is close to the context's final sentence, which mimics how a real model
    keeps talking about what it was just talking about. The repetition
    penalty is accepted for interface parity but has no effect here.
    """

    def __init__(
        self,
        pool: Sequence[str],
        similarity_weighting: bool = True,
        embedder: Embedder | None = None,
    ):
        sentences = []
        for entry in pool:
            segments = segment_sentences(entry)
            if segments:
                sentences.append(segments[0].text)
        if not sentences:
            raise ValueError("mock corpus pool is empty")
        self._pool = sentences
        self._weighting = similarity_weighting
        self._embedder = embedder or HashEmbedder()
        self._pool_matrix = (
            self._embedder.embed_texts(self._pool) if similarity_weighting else None
        )

    def sample_sentence(
        self, context: str, temperature: float, repetition_penalty: float, nonce: int
    ) -> tuple[str, bool]:
        rng = np.random.default_rng(nonce & 0xFFFFFFFFFFFFFFFF)
        if self._weighting:
            tail_sentences = segment_sentences(context)
            tail = tail_sentences[-1].text if tail_sentences else context
            similarity = self._pool_matrix @ self._embedder.embed_texts([tail])[0]
            logits = similarity / max(temperature, 1e-6)
            weights = np.exp(logits - logits.max())
            weights /= weights.sum()
            index = int(rng.choice(len(self._pool), p=weights))
        else:
            index = int(rng.integers(len(self._pool)))
        return self._pool[index], False


class RemoteLm:
    """Client for a completion service speaking the toolkit wire protocol.

    POST ``{url}/generate`` with prompt and sampling parameters, expect
    ``{"text": ...}``; multi-sentence completions are truncated to their
    first sentence. The server owns its randomness, so the nonce is ignored.
    Empty completions signal end-of-text.
    """

    def __init__(self, url: str, max_tokens: int = 255, timeout: float = 60.0, retries: int = 3):
        self._url = url.rstrip("/")
        self._max_tokens = max_tokens
        self._timeout = timeout
        self._retries = max(1, retries)

    def sample_sentence(
        self, context: str, temperature: float, repetition_penalty: float, nonce: int
    ) -> tuple[str, bool]:
        body = {
            "prompt": context,
            "temperature": temperature,
            "repetition_penalty": repetition_penalty,
            "max_tokens": self._max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self._retries):
            try:
                response = requests.post(
                    f"{self._url}/generate", json=body, timeout=self._timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                time.sleep(0.2 * 2**attempt)
                continue
            if response.status_code != 200:
                last_error = LmUnavailable(
                    f"generate endpoint returned HTTP {response.status_code}"
                )
                if response.status_code >= 500:
                    time.sleep(0.2 * 2**attempt)
                    continue
                break
            try:
                text = str(response.json()["text"])
            except (ValueError, KeyError, TypeError) as exc:
                raise LmUnavailable(f"malformed generate response: {exc}") from exc
            segments = segment_sentences(text)
            sentence = segments[0].text if segments else ""
            return sentence, text.strip() == ""
        raise LmUnavailable(f"generate request failed: {last_error}")


def normalize_candidate(raw: str) -> str | None:
    """Trim a raw completion to one replay-stable sentence.

    Takes the first sentence, guarantees terminal punctuation, and rejects
    (returns None) anything that would not re-segment to itself when followed
    by another sentence — e.g. text ending in an abbreviation. Detection
    re-splits the final document from scratch, so only stable sentences may
    be accepted.
    """
    text = raw.strip()
    if not text:
        return None
    segments = segment_sentences(text)
    if not segments:
        return None
    sentence = segments[0].text
    if sentence[-1] not in TERMINALS:
        sentence += "."
    probe = segment_sentences(f"{sentence} Zq.")
    if len(probe) != 2 or probe[0].text != sentence:
        return None
    return sentence


def _check_compatibility(model: ClusterModel, embedder: Embedder) -> None:
    spec = embedder.spec
    if spec.identity != model.embedder_identity:
        raise EmbedderMismatch(
            f"model trained with {model.embedder_identity!r}, embedder is {spec.identity!r}"
        )
    if spec.dimension != model.dimension:
        raise DimensionMismatch(
            f"embedder dimension {spec.dimension} != model dimension {model.dimension}"
        )


def _embed_one(embedder: Embedder, text: str) -> EmbeddingVector:
    return EmbeddingVector(values=embedder.embed_texts([text])[0])


def generate(
    prompt: str,
    model: ClusterModel,
    nssc: NsscConfig,
    gen: GenerationConfig,
    lm: LmBackend,
    embedder: Embedder,
    prompt_tail_only: bool = False,
) -> GenerationRecord:
    """Produce a watermarked continuation of ``prompt``.

    Each sentence is rejection-sampled until its primary cluster is green for
    the current rule; the rule state advances only on accepted sentences.
    Raises GenerationFailure (carrying the partial record) when a trial
    budget runs out, and LmUnavailable on backend transport failures.
    """
    if not prompt.strip():
        raise ValueError("prompt must be non-empty")
    _check_compatibility(model, embedder)
    rng = np.random.default_rng(gen.seed & 0xFFFFFFFFFFFFFFFF)
    state = INITIAL_STATE
    draws: list[SentenceDraw] = []
    context = prompt
    prev_text = prompt_seed_text(prompt, tail_only=prompt_tail_only)
    total_trials = 0

    def fail(reason: str) -> GenerationFailure:
        record = GenerationRecord(
            prompt=prompt,
            sentences=tuple(draws),
            outcome=Outcome.FAILED,
            failure_reason=reason,
        )
        return GenerationFailure(reason, record)

    for _ in range(gen.max_sentences):
        prev_mi = membership_index(predict_membership(model, _embed_one(embedder, prev_text)))
        prev_primary = primary_cluster(prev_mi)
        green = green_spaces(prev_mi, state.mode, nssc)
        trials = 0
        accepted: tuple[str, int] | None = None
        finished = False
        while accepted is None:
            if trials >= gen.max_trials_per_sentence:
                raise fail(
                    f"no green sentence within {gen.max_trials_per_sentence} trials"
                )
            if total_trials >= gen.max_total_trials:
                raise fail(f"total trial budget {gen.max_total_trials} exhausted")
            nonce = int(rng.integers(0, 2**63))
            raw, end_of_text = lm.sample_sentence(
                context, gen.temperature, gen.repetition_penalty, nonce
            )
            trials += 1
            total_trials += 1
            candidate = normalize_candidate(raw)
            if candidate is None:
                if end_of_text:
                    finished = True
                    break
                continue
            primary = primary_cluster(
                membership_index(predict_membership(model, _embed_one(embedder, candidate)))
            )
            if primary in green:
                accepted = (candidate, primary)
                finished = end_of_text
        if accepted is None:
            break  # model signalled end-of-text with nothing more to say
        sentence_text, sentence_primary = accepted
        draws.append(
            SentenceDraw(
                text=sentence_text,
                trials=trials,
                green=tuple(sorted(green)),
                mode=state.mode,
                primary=sentence_primary,
            )
        )
        state = advance_state(state, prev_primary, sentence_primary, nssc)
        context = f"{context} {sentence_text}"
        prev_text = sentence_text
        if finished:
            break
    return GenerationRecord(prompt=prompt, sentences=tuple(draws), outcome=Outcome.COMPLETED)


def generate_record(*args, **kwargs) -> GenerationRecord:
    """Like generate, but failures come back as records instead of raising."""
    try:
        return generate(*args, **kwargs)
    except GenerationFailure as exc:
        return exc.record


def derive_seed(seed: int, index: int) -> int:
    """Per-item seed for batch runs, stable under any execution order."""
    digest = hashlib.blake2b(f"{seed}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def config_with_seed(gen: GenerationConfig, seed: int) -> GenerationConfig:
    return replace(gen, seed=seed)
