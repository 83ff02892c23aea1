"""Run manifests: enough resolved state to reproduce any seeded command."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any

from .errors import IoFailure

MANIFEST_SUFFIX = ".manifest.json"


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict[str, Any]  # every default materialized
    inputs: dict[str, str]
    outputs: dict[str, str]
    seed: int | None
    toolkit_version: str
    duration_seconds: float

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": self.seed,
            "toolkit_version": self.toolkit_version,
            "duration_seconds": self.duration_seconds,
        }


def manifest_path_for(primary_output: str | os.PathLike) -> str:
    return f"{primary_output}{MANIFEST_SUFFIX}"


def write_manifest(manifest: RunManifest, path: str | os.PathLike) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(manifest.to_json_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as exc:
        raise IoFailure(f"could not write manifest {path}: {exc}") from exc


def load_manifest(path: str | os.PathLike) -> RunManifest:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise IoFailure(f"could not read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"manifest {path} is not valid JSON: {exc}") from exc
    try:
        return RunManifest(
            command=payload["command"],
            config=dict(payload["config"]),
            inputs=dict(payload["inputs"]),
            outputs=dict(payload["outputs"]),
            seed=payload.get("seed"),
            toolkit_version=str(payload["toolkit_version"]),
            duration_seconds=float(payload["duration_seconds"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"manifest {path} is missing fields: {exc}") from exc
