"""Foundational sentence and membership types plus deterministic segmentation.

Generation and detection must split text into exactly the same sentences and
rank cluster memberships exactly the same way, so everything here is a fixed
rule set: no learned components, no randomness, stable tie-breaks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

# Periods after these tokens never end a sentence.
ABBREVIATIONS = ("Dr.", "Mr.", "Mrs.", "Ms.", "U.S.", "e.g.", "i.e.", "etc.")

# Fragments shorter than this merge into a neighbouring sentence.
MIN_SENTENCE_CHARS = 2

_BOUNDARY = re.compile(r"[.!?]+(?=\s|$)")
_OPENERS = "\"'([{"

_NORM_TOL = 1e-6
_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document: trimmed text plus its 0-based position."""

    text: str
    index: int

    def __post_init__(self):
        if not self.text or self.text != self.text.strip():
            raise ValueError("sentence text must be non-empty and trimmed")
        if self.index < 0:
            raise ValueError("sentence index must be >= 0")


@dataclass(frozen=True)
class EmbeddingVector:
    """Unit-norm point in the sentence embedding space."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("embedding entries must be finite")
        norm = float(np.linalg.norm(values))
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"embedding must have unit norm, got {norm!r}")

    @property
    def dimension(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class MembershipVector:
    """Per-cluster membership degrees; entries in [0, 1] summing to 1."""

    degrees: np.ndarray

    def __post_init__(self):
        degrees = np.asarray(self.degrees, dtype=float)
        object.__setattr__(self, "degrees", degrees)
        if degrees.ndim != 1 or degrees.size == 0:
            raise ValueError("degrees must be a non-empty 1-D vector")
        if np.any(degrees < -_SUM_TOL) or np.any(degrees > 1.0 + _SUM_TOL):
            raise ValueError("degrees must lie in [0, 1]")
        if abs(float(degrees.sum()) - 1.0) > _SUM_TOL:
            raise ValueError("degrees must sum to 1")

    @property
    def cluster_count(self) -> int:
        return int(self.degrees.size)


@dataclass(frozen=True)
class MembershipIndex:
    """Cluster ids ordered by descending membership degree.

    Ties break toward the lower cluster id so the ranking is unique for any
    input, which keeps rule replay deterministic.
    """

    ranking: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.ranking) != list(range(len(self.ranking))):
            raise ValueError("ranking must be a permutation of 0..K-1")

    @property
    def cluster_count(self) -> int:
        return len(self.ranking)


def membership_index(mv: MembershipVector) -> MembershipIndex:
    """Rank clusters by descending degree; equal degrees keep ascending id order."""
    order = np.argsort(-mv.degrees, kind="stable")
    return MembershipIndex(ranking=tuple(int(j) for j in order))


def primary_cluster(mi: MembershipIndex) -> int:
    """Top-ranked cluster of a membership index."""
    return mi.ranking[0]


def _ends_with_abbreviation(text: str, end: int) -> bool:
    head = text[:end]
    parts = head.split()
    if not parts:
        return False
    token = parts[-1].lstrip(_OPENERS)
    return token in ABBREVIATIONS


def _raw_segments(text: str) -> list[str]:
    segments: list[str] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        if match.group() == "." and _ends_with_abbreviation(text, match.end()):
            continue
        piece = text[start : match.end()].strip()
        if piece:
            segments.append(piece)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        segments.append(tail)
    return segments


def segment_sentences(text: str) -> list[Sentence]:
    """Split a document into sentences with fixed, replayable rules.

    Boundaries are runs of '.', '!' or '?' followed by whitespace or end of
    text, except single periods closing a shipped abbreviation. Fragments
    shorter than MIN_SENTENCE_CHARS merge into the following sentence (or the
    preceding one when nothing follows). Only whitespace is lost relative to
    the input, so identical text always re-segments identically.
    """
    merged: list[str] = []
    pending = ""
    for piece in _raw_segments(text):
        if pending:
            piece = f"{pending} {piece}"
            pending = ""
        if len(piece) < MIN_SENTENCE_CHARS:
            pending = piece
            continue
        merged.append(piece)
    if pending:
        if merged:
            merged[-1] = f"{merged[-1]} {pending}"
        else:
            merged.append(pending)
    return [Sentence(text=t, index=i) for i, t in enumerate(merged)]


def join_sentences(sentences: list[Sentence]) -> str:
    """Inverse of segmentation up to whitespace normalization."""
    return " ".join(s.text for s in sentences)


def prompt_seed_text(prompt: str, tail_only: bool = False) -> str:
    """Text whose embedding seeds the rule chain before any generated sentence.

    By default the whole prompt acts as one pseudo-sentence; with
    ``tail_only`` only its final sentence does. Generation and detection must
    agree on this choice.
    """
    prompt = prompt.strip()
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if not tail_only:
        return prompt
    sentences = segment_sentences(prompt)
    return sentences[-1].text if sentences else prompt
