"""Monte Carlo oracle for the watermark ratio of unwatermarked sentence chains.

Independent, vectorized reimplementation of the rank rules and the switching
state machine: each sentence of a chain gets a uniformly random membership
ranking, the green set is read off the predecessor's ranking under the
current rule, and a hit is counted when the sentence's top cluster is green.
Used to pin the expected null ratio that the production replay must match.
"""

from __future__ import annotations

import numpy as np


def simulate_null_ratio_mean(
    chains: int,
    scored_per_chain: int,
    cluster_count: int = 8,
    v1_ranks: tuple[int, ...] = (0, 2),
    v2_ranks: tuple[int, ...] = (1, 3, 4, 5),
    match_budget: int = 5,
    seed: int = 0,
) -> float:
    """Mean watermark ratio over seeded random chains.

    A chain has ``scored_per_chain + 1`` sentences; the first only seeds the
    rule state. All chains step in lockstep so the simulation stays fast at
    10^5 chains without touching any production code path.
    """
    rng = np.random.default_rng(seed)
    steps = scored_per_chain + 1
    # rankings[c, t] is the ranking of chain c's sentence t: argsort of noise
    noise = rng.random((chains, steps, cluster_count))
    rankings = np.argsort(noise, axis=2)
    primaries = rankings[:, :, 0]

    in_v2 = np.zeros(chains, dtype=bool)
    counters = np.zeros(chains, dtype=np.int64)
    hits = np.zeros(chains, dtype=np.int64)
    v1 = np.asarray(v1_ranks)
    v2 = np.asarray(v2_ranks)
    for t in range(1, steps):
        prev_rank = rankings[:, t - 1, :]
        current = primaries[:, t]
        green_v1 = prev_rank[:, v1]
        green_v2 = prev_rank[:, v2]
        hit_v1 = (green_v1 == current[:, None]).any(axis=1)
        hit_v2 = (green_v2 == current[:, None]).any(axis=1)
        hits += np.where(in_v2, hit_v2, hit_v1)

        match = primaries[:, t - 1] == current
        next_counters = np.where(in_v2, 0, counters + match.astype(np.int64))
        fire = ~in_v2 & (next_counters >= match_budget)
        next_in_v2 = fire
        next_counters = np.where(fire | in_v2, 0, next_counters)
        in_v2 = next_in_v2
        counters = next_counters
    return float((hits / scored_per_chain).mean())
