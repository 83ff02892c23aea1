"""Synthetic multi-topic sentence pools for offline experiments.

Eight topics with disjoint vocabularies give the hash embedder clean
semantic structure. Soft clustering with the default fuzziness only resolves
clusters whose spread is small next to their separation (too loose and every
center slides into the grand mean), so each topic sentence carries six fixed
topic tokens and varies only its subject noun. Word order is shuffled for
readability; the embedder sees bags, so order never affects geometry. The
resulting clouds are tight, well separated, and balanced, letting
generation, detection, calibration and attacks run end to end with no model
downloads.
"""

from __future__ import annotations

import numpy as np

# fixed = [adjective, adjective, verb, adjective, scene noun, scene noun],
# every sentence of the topic contains all six plus one subject noun.
TOPICS: dict[str, dict[str, list[str]]] = {
    "astronomy": {
        "fixed": ["celestial", "astral", "outshines", "silent", "starlight", "observatory"],
        "nouns": ["telescope", "nebula", "comet", "orbit", "quasar", "eclipse",
                  "asteroid", "constellation", "supernova", "galaxy"],
    },
    "cooking": {
        "fixed": ["culinary", "savory", "enriches", "warm", "hearth", "kitchen"],
        "nouns": ["skillet", "broth", "saffron", "dough", "marinade", "ladle",
                  "oven", "garlic", "glaze", "pastry"],
    },
    "football": {
        "fixed": ["sporting", "athletic", "electrifies", "roaring", "matchday", "stadium"],
        "nouns": ["midfielder", "penalty", "goalkeeper", "corner", "tackle", "fixture",
                  "striker", "defender", "offside", "crossbar"],
    },
    "finance": {
        "fixed": ["monetary", "fiscal", "outperforms", "solvent", "treasury", "exchange"],
        "nouns": ["dividend", "ledger", "portfolio", "bond", "hedge", "margin",
                  "equity", "auditor", "futures", "yield"],
    },
    "gardening": {
        "fixed": ["botanical", "verdant", "nourishes", "sunlit", "greenhouse", "orchard"],
        "nouns": ["trellis", "mulch", "seedling", "compost", "pruner", "perennial",
                  "rosebush", "topsoil", "loam", "cutting"],
    },
    "music": {
        "fixed": ["musical", "melodic", "uplifts", "resonant", "orchestra", "auditorium"],
        "nouns": ["violin", "sonata", "chord", "tempo", "oboe", "crescendo",
                  "melody", "conductor", "refrain", "overture"],
    },
    "seafaring": {
        "fixed": ["nautical", "maritime", "outsails", "briny", "harborside", "seafoam"],
        "nouns": ["schooner", "rudder", "mast", "galleon", "anchor", "keel",
                  "lighthouse", "tide", "rigging", "gale"],
    },
    "programming": {
        "fixed": ["digital", "computational", "accelerates", "verbose", "codebase", "runtime"],
        "nouns": ["compiler", "pointer", "closure", "bytecode", "debugger", "mutex",
                  "recursion", "heap", "parser", "thread"],
    },
}

# Bag-identical orderings; only cosmetic variety.
_TEMPLATES = [
    "{a1} {a2} {noun} {verb} {a3} {s1} {s2}.",
    "{a2} {a1} {noun} {verb} {a3} {s2} {s1}.",
    "{a1} {a3} {noun} {verb} {a2} {s1} {s2}.",
]


def topic_names() -> list[str]:
    return list(TOPICS)


def make_sentence(topic: str, rng: np.random.Generator) -> str:
    bank = TOPICS[topic]
    a1, a2, verb, a3, s1, s2 = bank["fixed"]
    template = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
    sentence = template.format(
        a1=a1, a2=a2, a3=a3, s1=s1, s2=s2, verb=verb,
        noun=str(rng.choice(bank["nouns"])),
    )
    return sentence[0].upper() + sentence[1:]


def make_corpus(sentences_per_topic: int = 150, seed: int = 0) -> list[str]:
    """Balanced pool of topic sentences, interleaved and deterministic."""
    rng = np.random.default_rng(seed)
    pool: list[str] = []
    for _ in range(sentences_per_topic):
        for topic in TOPICS:
            pool.append(make_sentence(topic, rng))
    return pool


def make_prompts(count: int, seed: int = 0) -> list[str]:
    """Two-sentence prompts, each anchored in one topic."""
    rng = np.random.default_rng(seed)
    names = topic_names()
    prompts = []
    for i in range(count):
        topic = names[i % len(names)]
        prompts.append(f"{make_sentence(topic, rng)} {make_sentence(topic, rng)}")
    return prompts


def make_null_text(pool: list[str], sentence_count: int, rng: np.random.Generator) -> str:
    """Unwatermarked text: sentences drawn uniformly from the pool."""
    picks = rng.integers(0, len(pool), size=sentence_count)
    return " ".join(pool[int(i)] for i in picks)
