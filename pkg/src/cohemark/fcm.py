"""Fuzzy c-means training and membership prediction.

Soft clustering over unit-norm sentence embeddings: every point belongs to
every cluster with some degree. Training alternates two closed-form updates
until the membership matrix stabilizes:

  centers   <- degree^fuzziness weighted means of the points
  degrees   <- inverse distance-ratio rule, so u[i][j] is large when point i
               sits much closer to center j than to the others

Convergence is declared when the summed absolute change of the membership
matrix drops to ``epsilon`` or below. After training, centers are sorted
lexicographically so equal seeds always produce byte-identical model files.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmbedderMismatch,
    InsufficientData,
    IoFailure,
    NumericalFailure,
    SchemaVersionMismatch,
)
from .semantic import EmbeddingVector, MembershipVector

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FcmConfig:
    """Training knobs; the defaults converge quickly on desk-scale corpora."""

    cluster_count: int = 8
    fuzziness: float = 2.0
    epsilon: float = 1e-5
    max_iterations: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.cluster_count < 1:
            raise ValueError("cluster_count must be >= 1")
        if not self.fuzziness > 1.0:
            raise ValueError("fuzziness must be strictly greater than 1")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class ClusterModel:
    """Trained soft-cluster state, immutable and safe to share across threads."""

    centers: np.ndarray  # (cluster_count, dimension)
    fuzziness: float
    epsilon: float
    cluster_count: int
    embedder_identity: str
    training_meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        object.__setattr__(self, "centers", centers)
        if centers.ndim != 2 or centers.shape[0] != self.cluster_count:
            raise ValueError("centers must be a (cluster_count, dimension) matrix")
        if not np.all(np.isfinite(centers)):
            raise NumericalFailure("cluster centers contain non-finite entries")
        if not self.fuzziness > 1.0:
            raise ValueError("fuzziness must be strictly greater than 1")
        if not self.embedder_identity:
            raise ValueError("embedder_identity must be non-empty")

    @property
    def dimension(self) -> int:
        return int(self.centers.shape[1])


def _as_matrix(points: Sequence[EmbeddingVector] | np.ndarray) -> np.ndarray:
    if isinstance(points, np.ndarray):
        matrix = np.asarray(points, dtype=float)
    else:
        matrix = np.stack([p.values for p in points]) if len(points) else np.zeros((0, 0))
    if matrix.ndim != 2:
        raise ValueError("points must form a 2-D matrix")
    if not np.all(np.isfinite(matrix)):
        raise NumericalFailure("training points contain non-finite entries")
    return matrix


def _point_keys(points: np.ndarray, seed: int) -> list[bytes]:
    """Seeded per-point digests used for order-independent tie-breaking."""
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    return [
        hashlib.blake2b(point.tobytes(), digest_size=8, key=key).digest()
        for point in points
    ]


def _initial_centers(points: np.ndarray, cluster_count: int, seed: int) -> np.ndarray:
    """Farthest-point seeding of the initial centers.

    The seed picks the starting point through a keyed hash of each point's
    bytes; every further center is the point farthest from those already
    chosen, hash-tie-broken. Selection depends only on the point set, never
    on its order, so reordering the training data cannot change the fit.
    Spreading the seeds across the data is what keeps distinct clusters from
    collapsing onto the grand mean, which a flat random membership start is
    prone to.
    """
    keys = _point_keys(points, seed)
    first = min(range(points.shape[0]), key=lambda i: (keys[i], points[i].tobytes()))
    chosen = [first]
    nearest = np.linalg.norm(points - points[first], axis=1)
    for _ in range(cluster_count - 1):
        best = max(
            range(points.shape[0]),
            key=lambda i: (nearest[i], keys[i], points[i].tobytes()),
        )
        chosen.append(best)
        nearest = np.minimum(nearest, np.linalg.norm(points - points[best], axis=1))
    return points[chosen].copy()


def _initial_membership(
    points: np.ndarray, cluster_count: int, seed: int, fuzziness: float
) -> np.ndarray:
    """Initial membership matrix: the distance rule around the seeded centers."""
    centers = _initial_centers(points, cluster_count, seed)
    return _membership_from_distances(_distances(points, centers), fuzziness)


def _update_centers(points: np.ndarray, u: np.ndarray, fuzziness: float) -> np.ndarray:
    weights = u**fuzziness
    return (weights.T @ points) / weights.sum(axis=0)[:, None]


def _membership_from_distances(distances: np.ndarray, fuzziness: float) -> np.ndarray:
    """Inverse distance-ratio memberships, with the zero-distance special case.

    A point sitting exactly on a center belongs to it outright (lowest index
    wins if several centers coincide with the point).
    """
    exponent = 2.0 / (fuzziness - 1.0)
    u = np.zeros_like(distances)
    zero_rows = (distances == 0.0).any(axis=1)
    if zero_rows.any():
        hit = distances[zero_rows].argmin(axis=1)
        u[np.flatnonzero(zero_rows), hit] = 1.0
    regular = ~zero_rows
    if regular.any():
        d = distances[regular]
        ratios = (d / d.min(axis=1, keepdims=True)) ** -exponent
        u[regular] = ratios / ratios.sum(axis=1, keepdims=True)
    return u


def _distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)


def _objective(distances: np.ndarray, u: np.ndarray, fuzziness: float) -> float:
    return float(((u**fuzziness) * distances**2).sum())


def _canonical_order(centers: np.ndarray) -> list[int]:
    return sorted(range(centers.shape[0]), key=lambda j: tuple(centers[j]))


def train(
    points: Sequence[EmbeddingVector] | np.ndarray,
    cfg: FcmConfig,
    embedder_identity: str,
) -> ClusterModel:
    """Fit soft clusters to a corpus of unit-norm embeddings.

    Raises InsufficientData when there are fewer points than clusters and
    NumericalFailure if the updates ever produce non-finite values.
    """
    x = _as_matrix(points)
    n = x.shape[0]
    if n < cfg.cluster_count:
        raise InsufficientData(
            f"need at least {cfg.cluster_count} points, got {n}"
        )
    u = _initial_membership(x, cfg.cluster_count, cfg.seed, cfg.fuzziness)
    centers = np.zeros((cfg.cluster_count, x.shape[1]))
    objective_trace: list[float] = []
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        centers = _update_centers(x, u, cfg.fuzziness)
        if not np.all(np.isfinite(centers)):
            raise NumericalFailure("center update produced non-finite values")
        distances = _distances(x, centers)
        new_u = _membership_from_distances(distances, cfg.fuzziness)
        objective = _objective(distances, new_u, cfg.fuzziness)
        if not np.isfinite(objective):
            raise NumericalFailure("objective became non-finite")
        objective_trace.append(objective)
        shift = float(np.abs(new_u - u).sum())
        u = new_u
        if shift <= cfg.epsilon:
            break
    order = _canonical_order(centers)
    meta = {
        "iterations": iterations,
        "final_objective": objective_trace[-1],
        "seed": cfg.seed,
        "objective_trace": objective_trace,
    }
    return ClusterModel(
        centers=centers[order],
        fuzziness=cfg.fuzziness,
        epsilon=cfg.epsilon,
        cluster_count=cfg.cluster_count,
        embedder_identity=embedder_identity,
        training_meta=meta,
    )


def predict_membership(
    model: ClusterModel,
    x: EmbeddingVector,
    embedder_identity: str | None = None,
) -> MembershipVector:
    """Membership degrees of a fresh embedding under frozen centers."""
    if embedder_identity is not None and embedder_identity != model.embedder_identity:
        raise EmbedderMismatch(
            f"model trained with {model.embedder_identity!r}, "
            f"got vectors from {embedder_identity!r}"
        )
    if x.dimension != model.dimension:
        raise DimensionMismatch(
            f"embedding has dimension {x.dimension}, model expects {model.dimension}"
        )
    distances = _distances(x.values[None, :], model.centers)
    u = _membership_from_distances(distances, model.fuzziness)[0]
    return MembershipVector(degrees=u / u.sum())


def predict_membership_matrix(model: ClusterModel, matrix: np.ndarray) -> np.ndarray:
    """Batch variant of predict_membership for (n, dimension) row stacks."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != model.dimension:
        raise DimensionMismatch(
            f"expected (n, {model.dimension}) matrix, got shape {matrix.shape}"
        )
    u = _membership_from_distances(_distances(matrix, model.centers), model.fuzziness)
    return u / u.sum(axis=1, keepdims=True)


def save_model(model: ClusterModel, path: str | os.PathLike) -> None:
    """Write the model as versioned JSON with full float round-trip precision."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "cluster_count": model.cluster_count,
        "dimension": model.dimension,
        "fuzziness": model.fuzziness,
        "epsilon": model.epsilon,
        "embedder_identity": model.embedder_identity,
        "centers": [[float(v) for v in row] for row in model.centers],
        "training_meta": model.training_meta,
    }
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, sort_keys=True, separators=(",", ":"))
            handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"could not write model file {path}: {exc}") from exc


def load_model(path: str | os.PathLike) -> ClusterModel:
    """Load a model written by save_model; centers round-trip bit-identically."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise IoFailure(f"could not read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise IoFailure(f"model file {path} does not hold a JSON object")
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise SchemaVersionMismatch(
            f"unknown model format version {version!r}, expected {MODEL_FORMAT_VERSION}"
        )
    try:
        model = ClusterModel(
            centers=np.asarray(payload["centers"], dtype=float),
            fuzziness=float(payload["fuzziness"]),
            epsilon=float(payload["epsilon"]),
            cluster_count=int(payload["cluster_count"]),
            embedder_identity=str(payload["embedder_identity"]),
            training_meta=dict(payload.get("training_meta", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"model file {path} is missing or corrupting fields: {exc}") from exc
    if model.dimension != int(payload["dimension"]):
        raise IoFailure(f"model file {path} declares inconsistent dimension")
    return model
