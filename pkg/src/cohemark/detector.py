"""Watermark detection by rule replay, plus threshold calibration and metrics.

Detection re-segments a candidate text, recomputes every sentence's cluster
memberships with the same embedder and centers used at generation time, and
replays the selection rules from the initial state. The watermark ratio is
the fraction of scored sentences whose primary cluster was green; texts
whose ratio clears a calibrated threshold are flagged as watermarked.
"""

from __future__ import annotations

import csv
import enum
import math
import os
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .embedder import Embedder
from .errors import DimensionMismatch, EmbedderMismatch, EmptyInput
from .fcm import ClusterModel, predict_membership_matrix
from .sampler import (
    INITIAL_STATE,
    Mode,
    NsscConfig,
    advance_state,
    green_spaces,
)
from .semantic import (
    MembershipIndex,
    MembershipVector,
    membership_index,
    primary_cluster,
    prompt_seed_text,
    segment_sentences,
)

DEFAULT_MIN_SCORED = 3


class Verdict(str, enum.Enum):
    WATERMARKED = "watermarked"
    CLEAN = "clean"
    UNDECIDABLE = "undecidable"


@dataclass(frozen=True)
class SentenceScore:
    """Replay trace for one scored sentence."""

    primary: int
    green: tuple[int, ...]
    mode: Mode
    hit: bool


@dataclass(frozen=True)
class DetectionResult:
    green_count: int  # sentences whose primary cluster was green
    scored_count: int  # sentences with a defined predecessor
    ratio: float
    threshold: float
    verdict: Verdict
    trace: tuple[SentenceScore, ...]
    z_score: float | None = None

    def __post_init__(self):
        if self.green_count > self.scored_count:
            raise ValueError("green_count cannot exceed scored_count")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "ratio": self.ratio,
            "s_v": self.green_count,
            "s_t": self.scored_count,
            "threshold": self.threshold,
            "verdict": self.verdict.value,
            "z_score": self.z_score,
            "trace": [
                {
                    "primary": t.primary,
                    "green": list(t.green),
                    "mode": t.mode.value,
                    "hit": t.hit,
                }
                for t in self.trace
            ],
        }


@dataclass(frozen=True)
class CalibrationReport:
    """Decision threshold fitted to an unwatermarked score sample."""

    target_fpr: float
    threshold: float
    sample_size: int
    null_mean: float
    null_quantiles: dict[str, float]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "target_fpr": self.target_fpr,
            "threshold": self.threshold,
            "null_sample_size": self.sample_size,
            "null_mean": self.null_mean,
            "null_quantiles": self.null_quantiles,
        }


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float


@dataclass(frozen=True)
class EvaluationResult:
    tpr_at_fpr: float
    threshold: float
    target_fpr: float
    roc: tuple[RocPoint, ...]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "tpr_at_fpr": self.tpr_at_fpr,
            "threshold": self.threshold,
            "target_fpr": self.target_fpr,
        }


def replay_memberships(
    memberships: Sequence[MembershipVector],
    nssc: NsscConfig,
) -> tuple[int, int, tuple[SentenceScore, ...]]:
    """Fold the selection rules over a predecessor-chained membership sequence.

    ``memberships[0]`` seeds the chain (a prompt or an unscored first
    sentence); every later entry is scored against its predecessor. Returns
    (green hits, scored count, per-sentence trace).
    """
    indexes: list[MembershipIndex] = [membership_index(mv) for mv in memberships]
    state = INITIAL_STATE
    hits = 0
    trace: list[SentenceScore] = []
    for prev_mi, current_mi in zip(indexes, indexes[1:]):
        green = green_spaces(prev_mi, state.mode, nssc)
        primary = primary_cluster(current_mi)
        hit = primary in green
        hits += int(hit)
        trace.append(
            SentenceScore(
                primary=primary, green=tuple(sorted(green)), mode=state.mode, hit=hit
            )
        )
        state = advance_state(state, primary_cluster(prev_mi), primary, nssc)
    return hits, len(trace), tuple(trace)


def result_from_replay(
    hits: int,
    scored: int,
    trace: tuple[SentenceScore, ...],
    threshold: float,
    min_scored: int = DEFAULT_MIN_SCORED,
    null_hit_rate: float | None = None,
) -> DetectionResult:
    """Assemble a DetectionResult from replay counts; ratio is exact S_V/S_T."""
    ratio = hits / scored if scored > 0 else 0.0
    if scored < min_scored:
        verdict = Verdict.UNDECIDABLE
    elif ratio >= threshold:
        verdict = Verdict.WATERMARKED
    else:
        verdict = Verdict.CLEAN
    z_score = None
    if null_hit_rate is not None and scored > 0 and 0.0 < null_hit_rate < 1.0:
        spread = math.sqrt(scored * null_hit_rate * (1.0 - null_hit_rate))
        z_score = (hits - scored * null_hit_rate) / spread
    return DetectionResult(
        green_count=hits,
        scored_count=scored,
        ratio=ratio,
        threshold=threshold,
        verdict=verdict,
        trace=trace,
        z_score=z_score,
    )


def detect(
    text: str,
    model: ClusterModel,
    nssc: NsscConfig,
    threshold: float,
    embedder: Embedder,
    prompt: str | None = None,
    prompt_tail_only: bool = False,
    min_scored: int = DEFAULT_MIN_SCORED,
    null_hit_rate: float | None = None,
) -> DetectionResult:
    """Score a text for the watermark.

    Without a prompt the first sentence has no predecessor and goes unscored;
    with the prompt supplied it is scored against the prompt embedding, which
    reproduces generation exactly. Too few scored sentences yield an
    Undecidable verdict instead of an error.
    """
    spec = embedder.spec
    if spec.identity != model.embedder_identity:
        raise EmbedderMismatch(
            f"model trained with {model.embedder_identity!r}, embedder is {spec.identity!r}"
        )
    if spec.dimension != model.dimension:
        raise DimensionMismatch(
            f"embedder dimension {spec.dimension} != model dimension {model.dimension}"
        )
    chain: list[str] = []
    if prompt is not None:
        chain.append(prompt_seed_text(prompt, tail_only=prompt_tail_only))
    chain.extend(s.text for s in segment_sentences(text))
    if len(chain) < 2:
        return result_from_replay(0, 0, (), threshold, min_scored, null_hit_rate)
    matrix = embedder.embed_texts(chain)
    memberships = [
        MembershipVector(degrees=row) for row in predict_membership_matrix(model, matrix)
    ]
    hits, scored, trace = replay_memberships(memberships, nssc)
    return result_from_replay(hits, scored, trace, threshold, min_scored, null_hit_rate)


def calibrate_threshold(
    null_scores: Sequence[float],
    target_fpr: float,
) -> CalibrationReport:
    """Smallest threshold whose empirical false-positive rate is within target.

    Conservative step rule: with n null scores and target rate a, at most
    floor(a*n) scores may sit at or above the threshold, so the threshold is
    the next representable value above the (floor(a*n)+1)-th largest score.
    """
    if len(null_scores) == 0:
        raise EmptyInput("calibration requires at least one null score")
    if not 0.0 < target_fpr < 1.0:
        raise ValueError("target_fpr must be in (0, 1)")
    if len(null_scores) < 100:
        warnings.warn(
            f"calibrating on only {len(null_scores)} null scores; "
            "thresholds may be unstable",
            stacklevel=2,
        )
    scores = np.sort(np.asarray(null_scores, dtype=float))[::-1]
    allowed = int(math.floor(target_fpr * len(scores)))
    threshold = float(np.nextafter(scores[allowed], np.inf))
    quantiles = {
        "q50": float(np.quantile(scores, 0.50)),
        "q90": float(np.quantile(scores, 0.90)),
        "q99": float(np.quantile(scores, 0.99)),
    }
    return CalibrationReport(
        target_fpr=target_fpr,
        threshold=threshold,
        sample_size=len(scores),
        null_mean=float(scores.mean()),
        null_quantiles=quantiles,
    )


def evaluate(
    watermarked_scores: Sequence[float],
    null_scores: Sequence[float],
    target_fpr: float,
) -> EvaluationResult:
    """True-positive rate at the calibrated threshold, plus the full ROC sweep."""
    if len(watermarked_scores) == 0 or len(null_scores) == 0:
        raise EmptyInput("evaluation requires both watermarked and null scores")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = calibrate_threshold(null_scores, target_fpr)
    watermarked = np.asarray(watermarked_scores, dtype=float)
    null = np.asarray(null_scores, dtype=float)
    tpr = float((watermarked >= report.threshold).mean())
    roc = []
    for value in np.unique(np.concatenate([watermarked, null])):
        roc.append(
            RocPoint(
                threshold=float(value),
                fpr=float((null >= value).mean()),
                tpr=float((watermarked >= value).mean()),
            )
        )
    return EvaluationResult(
        tpr_at_fpr=tpr,
        threshold=report.threshold,
        target_fpr=target_fpr,
        roc=tuple(roc),
    )


def write_roc_csv(result: EvaluationResult, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["fpr", "tpr", "threshold"])
        for point in result.roc:
            writer.writerow([repr(point.fpr), repr(point.tpr), repr(point.threshold)])
