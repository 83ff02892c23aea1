"""Emit the synthetic demo corpus, prompts, and null texts for CLI runs."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from cohemark.synthcorpus import make_corpus, make_null_text, make_prompts


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Write demo corpus files")
    parser.add_argument("--out-dir", type=Path, default=Path("demo"))
    parser.add_argument("--sentences-per-topic", type=int, default=150)
    parser.add_argument("--prompts", type=int, default=200)
    parser.add_argument("--null-texts", type=int, default=700)
    parser.add_argument("--null-sentences", type=int, default=15)
    parser.add_argument("--seed", type=int, default=1)
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    pool = make_corpus(args.sentences_per_topic, seed=args.seed)
    (args.out_dir / "corpus.txt").write_text("\n".join(pool) + "\n")
    prompts = make_prompts(args.prompts, seed=args.seed + 1)
    (args.out_dir / "prompts.txt").write_text("\n".join(prompts) + "\n")
    rng = np.random.default_rng(args.seed + 2)
    rows = [
        json.dumps({"text": make_null_text(pool, args.null_sentences, rng)})
        for _ in range(args.null_texts)
    ]
    (args.out_dir / "null.jsonl").write_text("\n".join(rows) + "\n")
    print(
        f"wrote {len(pool)} corpus sentences, {len(prompts)} prompts, "
        f"{len(rows)} null texts to {args.out_dir}/"
    )


if __name__ == "__main__":
    main()
