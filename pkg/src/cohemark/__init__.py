"""Sentence-level text watermarking toolkit.

Trains a soft cluster model over sentence embeddings, generates watermarked
text by rejection-sampling sentences whose primary cluster falls in
cohesion-derived green semantic spaces, and detects the watermark by
replaying those rules and thresholding the green-sentence ratio.
"""

__version__ = "0.1.0"

from .detector import DetectionResult, Verdict, calibrate_threshold, detect, evaluate
from .embedder import EmbedderSpec, HashEmbedder, RemoteEmbedder, embed
from .fcm import ClusterModel, FcmConfig, load_model, predict_membership, save_model, train
from .sampler import (
    GenerationConfig,
    GenerationRecord,
    Mode,
    NsscConfig,
    Outcome,
    SamplerState,
    advance_state,
    generate,
    generate_record,
    green_spaces,
)
from .semantic import (
    EmbeddingVector,
    MembershipIndex,
    MembershipVector,
    Sentence,
    membership_index,
    primary_cluster,
    segment_sentences,
)

__all__ = [
    "ClusterModel",
    "DetectionResult",
    "EmbedderSpec",
    "EmbeddingVector",
    "FcmConfig",
    "GenerationConfig",
    "GenerationRecord",
    "HashEmbedder",
    "MembershipIndex",
    "MembershipVector",
    "Mode",
    "NsscConfig",
    "Outcome",
    "RemoteEmbedder",
    "SamplerState",
    "Sentence",
    "Verdict",
    "advance_state",
    "calibrate_threshold",
    "detect",
    "embed",
    "evaluate",
    "generate",
    "generate_record",
    "green_spaces",
    "load_model",
    "membership_index",
    "predict_membership",
    "primary_cluster",
    "save_model",
    "segment_sentences",
    "train",
]
