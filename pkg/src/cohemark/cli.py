"""Command-line surface binding the toolkit into operator workflows.

Every command materializes its full configuration, runs, and drops a
manifest next to its primary output; re-running a seeded command from its
manifest reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from . import __version__
from .attacks import AttackConfig, AttackRow, embedding_noise_attack, paraphrase_attack, write_attack_csv
from .detector import calibrate_threshold, detect, evaluate, write_roc_csv
from .embedder import HashEmbedder, RemoteEmbedder, embedder_from_identity
from .errors import (
    CohemarkError,
    DimensionMismatch,
    EmbedderMismatch,
    EmptyInput,
    EmptyResponse,
    InsufficientData,
    IoFailure,
    LmUnavailable,
    RankOutOfRange,
    RemoteUnavailable,
    SchemaVersionMismatch,
)
from .fcm import FcmConfig, load_model, save_model, train
from .manifest import RunManifest, load_manifest, manifest_path_for, write_manifest
from .sampler import (
    CorpusMockLm,
    GenerationConfig,
    GenerationRecord,
    NsscConfig,
    Outcome,
    RemoteLm,
    config_with_seed,
    derive_seed,
    generate_record,
)

OUTPUT_KEYS = {
    "train-clusters": ("out",),
    "generate": ("out",),
    "detect": ("out",),
    "calibrate": ("out",),
    "evaluate": ("out", "roc_out"),
    "attack": ("out",),
}


@dataclass
class CommandResult:
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    exit_code: int = 0


def _read_lines(path: str) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = [line.strip() for line in handle]
    except OSError as exc:
        raise IoFailure(f"could not read {path}: {exc}") from exc
    lines = [line for line in lines if line]
    if not lines:
        raise IoFailure(f"{path} contains no usable lines")
    return lines


def _read_records(path: str) -> list[dict[str, Any]]:
    """Texts to score: JSONL objects, or a plain file treated as one text."""
    if path.endswith(".jsonl"):
        records = []
        for i, line in enumerate(_read_lines(path)):
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IoFailure(f"{path}:{i + 1} is not valid JSON: {exc}") from exc
            if not isinstance(payload, dict):
                raise IoFailure(f"{path}:{i + 1} is not a JSON object")
            records.append(payload)
        return records
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read().strip()
    except OSError as exc:
        raise IoFailure(f"could not read {path}: {exc}") from exc
    if not text:
        raise IoFailure(f"{path} is empty")
    return [{"text": text}]


def _write_jsonl(rows: Iterable[dict[str, Any]], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
                handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"could not write {path}: {exc}") from exc


def _write_json(payload: dict[str, Any], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"could not write {path}: {exc}") from exc


def _embedder_for_training(cfg: dict[str, Any]):
    if cfg["embedder"] == "hash":
        return HashEmbedder(dimension=cfg["dimension"])
    if not cfg["embed_url"]:
        raise ValueError("remote embedder requires --embed-url or COHEMARK_EMBED_URL")
    remote = RemoteEmbedder(cfg["embed_url"])
    remote.resolve()
    return remote


def _embedder_for_model(model, cfg: dict[str, Any]):
    return embedder_from_identity(model.embedder_identity, embed_url=cfg.get("embed_url"))


def _parallel_map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_train_clusters(cfg: dict[str, Any]) -> CommandResult:
    corpus = _read_lines(cfg["corpus"])
    embedder = _embedder_for_training(cfg)
    matrix = embedder.embed_texts(corpus)
    fcm_cfg = FcmConfig(
        cluster_count=cfg["clusters"],
        fuzziness=cfg["fuzziness"],
        epsilon=cfg["epsilon"],
        max_iterations=cfg["max_iterations"],
        seed=cfg["seed"],
    )
    if matrix.shape[0] < fcm_cfg.cluster_count:
        raise InsufficientData(
            f"need at least {fcm_cfg.cluster_count} points, got {matrix.shape[0]}"
        )
    model = train(matrix, fcm_cfg, embedder.spec.identity)
    save_model(model, cfg["out"])
    meta = model.training_meta
    print(
        f"trained {model.cluster_count} clusters on {matrix.shape[0]} sentences: "
        f"{meta['iterations']} iterations, objective {meta['final_objective']:.6f}"
    )
    return CommandResult(
        inputs={"corpus": cfg["corpus"]},
        outputs={"model": cfg["out"]},
    )


def cmd_generate(cfg: dict[str, Any]) -> CommandResult:
    prompts = _read_lines(cfg["prompt_file"])
    model = load_model(cfg["model"])
    embedder = _embedder_for_model(model, cfg)
    if cfg["backend"] == "mock":
        if not cfg["mock_corpus"]:
            raise ValueError("--backend mock requires --mock-corpus")
        lm = CorpusMockLm(
            _read_lines(cfg["mock_corpus"]),
            similarity_weighting=not cfg["uniform_mock"],
            embedder=embedder if embedder.spec.kind == "hash" else None,
        )
    else:
        if not cfg["lm_url"]:
            raise ValueError("--backend remote requires --lm-url or COHEMARK_LM_URL")
        lm = RemoteLm(cfg["lm_url"], max_tokens=cfg["max_tokens"])
    nssc = NsscConfig()
    base = GenerationConfig(
        max_sentences=cfg["sentences"],
        max_trials_per_sentence=cfg["trials"],
        temperature=cfg["temperature"],
        repetition_penalty=cfg["repetition_penalty"],
        max_total_trials=cfg["max_total_trials"],
        seed=cfg["seed"],
    )

    def run_one(indexed: tuple[int, str]) -> GenerationRecord:
        i, prompt = indexed
        return generate_record(
            prompt,
            model,
            nssc,
            config_with_seed(base, derive_seed(cfg["seed"], i)),
            lm,
            embedder,
            prompt_tail_only=cfg["prompt_tail"],
        )

    records = _parallel_map(run_one, list(enumerate(prompts)), cfg["jobs"])
    _write_jsonl((r.to_json_dict() for r in records), cfg["out"])
    failed = sum(1 for r in records if r.outcome is Outcome.FAILED)
    rate = failed / len(records)
    print(f"generated {len(records)} records, failure rate {rate:.1%}")
    result = CommandResult(
        inputs={"prompt_file": cfg["prompt_file"], "model": cfg["model"]},
        outputs={"generations": cfg["out"]},
    )
    if cfg["mock_corpus"]:
        result.inputs["mock_corpus"] = cfg["mock_corpus"]
    if failed == len(records):
        print("error: every generation failed", file=sys.stderr)
        result.exit_code = 4
    return result


def _require_text_fields(records: list[dict[str, Any]], path: str) -> None:
    for i, record in enumerate(records):
        if "text" not in record:
            raise IoFailure(f"{path}: record {i} has no text field")


def _texts_and_prompts(cfg: dict[str, Any]) -> tuple[list[dict[str, Any]], list[str | None]]:
    records = _read_records(cfg["infile"])
    _require_text_fields(records, cfg["infile"])
    prompts: list[str | None] = [None] * len(records)
    if cfg.get("prompt_file"):
        lines = _read_lines(cfg["prompt_file"])
        if len(lines) != len(records):
            raise ValueError(
                f"{len(lines)} prompts for {len(records)} texts; counts must match"
            )
        prompts = list(lines)
    return records, prompts


def cmd_detect(cfg: dict[str, Any]) -> CommandResult:
    model = load_model(cfg["model"])
    embedder = _embedder_for_model(model, cfg)
    nssc = NsscConfig()
    records, prompts = _texts_and_prompts(cfg)

    def run_one(item: tuple[int, dict[str, Any], str | None]) -> dict[str, Any]:
        i, record, prompt = item
        result = detect(
            record["text"],
            model,
            nssc,
            cfg["threshold"],
            embedder,
            prompt=prompt,
            prompt_tail_only=cfg["prompt_tail"],
            min_scored=cfg["min_scored"],
            null_hit_rate=cfg["null_hit_rate"],
        )
        return {"id": i, **result.to_json_dict()}

    rows = _parallel_map(
        run_one, [(i, r, p) for i, (r, p) in enumerate(zip(records, prompts))], cfg["jobs"]
    )
    _write_jsonl(rows, cfg["out"])
    flagged = sum(1 for row in rows if row["verdict"] == "watermarked")
    print(f"detected {flagged}/{len(rows)} texts as watermarked")
    inputs = {"texts": cfg["infile"], "model": cfg["model"]}
    if cfg.get("prompt_file"):
        inputs["prompt_file"] = cfg["prompt_file"]
    return CommandResult(inputs=inputs, outputs={"report": cfg["out"]})


def _ratios_for(path: str, model, embedder, nssc, cfg: dict[str, Any]) -> list[float]:
    records = _read_records(path)
    _require_text_fields([r for r in records if "ratio" not in r], path)

    def run_one(record: dict[str, Any]) -> float:
        if "ratio" in record:
            return float(record["ratio"])
        result = detect(
            record["text"], model, nssc, 1.0, embedder, min_scored=cfg["min_scored"]
        )
        return result.ratio

    return _parallel_map(run_one, records, cfg["jobs"])


def cmd_calibrate(cfg: dict[str, Any]) -> CommandResult:
    model = load_model(cfg["model"])
    embedder = _embedder_for_model(model, cfg)
    scores = _ratios_for(cfg["null_file"], model, embedder, NsscConfig(), cfg)
    report = calibrate_threshold(scores, cfg["fpr"])
    _write_json(report.to_json_dict(), cfg["out"])
    print(
        f"calibrated threshold {report.threshold:.6f} at target FPR {report.target_fpr} "
        f"on {report.sample_size} null texts"
    )
    return CommandResult(
        inputs={"null_texts": cfg["null_file"], "model": cfg["model"]},
        outputs={"calibration": cfg["out"]},
    )


def cmd_evaluate(cfg: dict[str, Any]) -> CommandResult:
    model = load_model(cfg["model"])
    embedder = _embedder_for_model(model, cfg)
    nssc = NsscConfig()
    watermarked = _ratios_for(cfg["watermarked"], model, embedder, nssc, cfg)
    null = _ratios_for(cfg["null_file"], model, embedder, nssc, cfg)
    result = evaluate(watermarked, null, cfg["fpr"])
    _write_json(result.to_json_dict(), cfg["out"])
    outputs = {"metrics": cfg["out"]}
    if cfg["roc_out"]:
        write_roc_csv(result, cfg["roc_out"])
        outputs["roc"] = cfg["roc_out"]
    print(f"TPR@{result.target_fpr:.0%} = {result.tpr_at_fpr:.4f} (threshold {result.threshold:.6f})")
    return CommandResult(
        inputs={"watermarked": cfg["watermarked"], "null_texts": cfg["null_file"], "model": cfg["model"]},
        outputs=outputs,
    )


def cmd_attack(cfg: dict[str, Any]) -> CommandResult:
    model = load_model(cfg["model"])
    embedder = _embedder_for_model(model, cfg)
    nssc = NsscConfig()
    try:
        records = [GenerationRecord.from_json_dict(r) for r in _read_records(cfg["infile"])]
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"{cfg['infile']} is not a generations file: {exc}") from exc
    if cfg["kind"] == "embedding_noise":
        attack_cfg = AttackConfig(kind="embedding_noise", noise_sigma=cfg["sigma"])
        label = repr(cfg["sigma"])
    else:
        if not cfg["lm_url"]:
            raise ValueError("paraphrase_remote requires --lm-url or COHEMARK_LM_URL")
        attack_cfg = AttackConfig(kind="paraphrase_remote", endpoint=cfg["lm_url"])
        label = cfg["lm_url"]

    def run_one(indexed: tuple[int, GenerationRecord]) -> AttackRow:
        i, record = indexed
        if cfg["kind"] == "embedding_noise":
            before = embedding_noise_attack(
                record, 0.0, derive_seed(cfg["seed"], i), model, nssc, embedder,
                threshold=cfg["threshold"],
            )
            after = embedding_noise_attack(
                record, cfg["sigma"], derive_seed(cfg["seed"], i), model, nssc, embedder,
                threshold=cfg["threshold"],
            )
            return AttackRow(str(i), cfg["kind"], label, before.ratio, after.ratio)
        before = detect(
            record.text, model, nssc, cfg["threshold"], embedder, prompt=record.prompt
        )
        attacked = paraphrase_attack(record.prompt, record.text, attack_cfg)
        after = detect(
            attacked, model, nssc, cfg["threshold"], embedder, prompt=record.prompt
        )
        return AttackRow(str(i), cfg["kind"], label, before.ratio, after.ratio)

    jobs = cfg["jobs"]
    if cfg["kind"] == "paraphrase_remote":
        jobs = min(jobs, 4)  # bound in-flight requests against the paraphraser
    rows = _parallel_map(run_one, list(enumerate(records)), jobs)
    write_attack_csv(rows, cfg["out"])
    mean_before = sum(r.r_before for r in rows) / len(rows)
    mean_after = sum(r.r_after for r in rows) / len(rows)
    print(f"attack {cfg['kind']}: mean r {mean_before:.4f} -> {mean_after:.4f}")
    return CommandResult(
        inputs={"generations": cfg["infile"], "model": cfg["model"]},
        outputs={"attack_report": cfg["out"]},
    )


COMMANDS: dict[str, Callable[[dict[str, Any]], CommandResult]] = {
    "train-clusters": cmd_train_clusters,
    "generate": cmd_generate,
    "detect": cmd_detect,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "attack": cmd_attack,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohemark",
        description="Sentence-level watermarking: train clusters, generate, detect, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"cohemark {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--embed-url", default=os.environ.get("COHEMARK_EMBED_URL"))

    p = sub.add_parser("train-clusters", help="fit the fuzzy cluster model to a corpus")
    p.add_argument("--corpus", required=True, help="one sentence per line, UTF-8")
    p.add_argument("--out", required=True)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--fuzziness", type=float, default=2.0)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--max-iterations", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embedder", choices=("hash", "remote"), default="hash")
    p.add_argument("--dimension", type=int, default=64)
    add_common(p)

    p = sub.add_parser("generate", help="produce watermarked continuations")
    p.add_argument("--prompt-file", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=("mock", "remote"), default="mock")
    p.add_argument("--mock-corpus")
    p.add_argument("--uniform-mock", action="store_true",
                   help="disable similarity weighting in the mock backend")
    p.add_argument("--lm-url", default=os.environ.get("COHEMARK_LM_URL"))
    p.add_argument("--sentences", type=int, default=15)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--max-total-trials", type=int, default=None)
    p.add_argument("--max-tokens", type=int, default=255)
    p.add_argument("--temperature", type=float, default=0.9)
    p.add_argument("--repetition-penalty", type=float, default=1.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prompt-tail", action="store_true",
                   help="seed the rule chain with only the prompt's last sentence")
    add_common(p)

    p = sub.add_parser("detect", help="score texts for the watermark")
    p.add_argument("--in", dest="infile", required=True,
                   help="JSONL with text fields, or a plain text file")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--prompt-file")
    p.add_argument("--prompt-tail", action="store_true")
    p.add_argument("--min-scored", type=int, default=3)
    p.add_argument("--null-hit-rate", type=float, default=None)
    add_common(p)

    p = sub.add_parser("calibrate", help="fit a decision threshold to null texts")
    p.add_argument("--null", dest="null_file", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--fpr", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--min-scored", type=int, default=3)
    add_common(p)

    p = sub.add_parser("evaluate", help="TPR at fixed FPR plus ROC sweep")
    p.add_argument("--watermarked", required=True)
    p.add_argument("--null", dest="null_file", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--fpr", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--roc-out", default=None)
    p.add_argument("--min-scored", type=int, default=3)
    add_common(p)

    p = sub.add_parser("attack", help="run a robustness attack over generations")
    p.add_argument("--kind", choices=("embedding_noise", "paraphrase_remote"), required=True)
    p.add_argument("--in", dest="infile", required=True, help="generations JSONL")
    p.add_argument("--model", required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--lm-url", default=os.environ.get("COHEMARK_LM_URL"))
    p.add_argument("--out", required=True)
    add_common(p)

    p = sub.add_parser("rerun", help="re-execute a command from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", default=None,
                   help="redirect outputs into this directory (same filenames)")

    return parser


def _resolve(args: argparse.Namespace) -> dict[str, Any]:
    cfg = {k: v for k, v in vars(args).items() if k not in ("command",)}
    return cfg


def _run_command(command: str, cfg: dict[str, Any]) -> int:
    start = time.monotonic()
    result = COMMANDS[command](cfg)
    duration = time.monotonic() - start
    manifest = RunManifest(
        command=command,
        config=cfg,
        inputs=result.inputs,
        outputs=result.outputs,
        seed=cfg.get("seed"),
        toolkit_version=__version__,
        duration_seconds=duration,
    )
    write_manifest(manifest, manifest_path_for(cfg["out"]))
    return result.exit_code


def _rerun(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    if manifest.command not in COMMANDS:
        raise ValueError(f"manifest names unknown command {manifest.command!r}")
    cfg = dict(manifest.config)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for key in OUTPUT_KEYS[manifest.command]:
            if cfg.get(key):
                cfg[key] = str(out_dir / Path(cfg[key]).name)
    return _run_command(manifest.command, cfg)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            return _rerun(args)
        return _run_command(args.command, _resolve(args))
    except (
        InsufficientData,
        SchemaVersionMismatch,
        EmbedderMismatch,
        DimensionMismatch,
        RankOutOfRange,
        EmptyInput,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IoFailure, OSError, RemoteUnavailable, LmUnavailable, EmptyResponse) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CohemarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
