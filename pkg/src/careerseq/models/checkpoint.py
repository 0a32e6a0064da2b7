"""Checkpoint directory format shared by all trainable models.

A checkpoint is a directory holding ``manifest.json`` plus one raw
little-endian float32 tensor file per named parameter under ``params/``.
Loading verifies both tensor shapes and the manifest's config hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def save_checkpoint(path, kind: str, params: dict[str, np.ndarray], config: dict) -> None:
    root = Path(path)
    (root / "params").mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "config_hash": config_hash(config),
        "params": {name: list(arr.shape) for name, arr in params.items()},
    }
    with open(root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    for name, arr in params.items():
        arr.astype("<f4").tofile(root / "params" / f"{_safe_name(name)}.f32")


def load_checkpoint(path) -> tuple[str, dict[str, np.ndarray], dict]:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise CheckpointError(f"no manifest.json under {path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')}")
    if config_hash(manifest["config"]) != manifest["config_hash"]:
        raise CheckpointError("config hash mismatch: checkpoint config was modified")
    params: dict[str, np.ndarray] = {}
    for name, shape in manifest["params"].items():
        file = root / "params" / f"{_safe_name(name)}.f32"
        arr = np.fromfile(file, dtype="<f4")
        expected = int(np.prod(shape)) if shape else 1
        if arr.size != expected:
            raise CheckpointError(f"tensor {name}: found {arr.size} values, expected shape {shape}")
        params[name] = arr.reshape(shape).astype(np.float32)
    return manifest["kind"], params, manifest["config"]


def _safe_name(name: str) -> str:
    return name.replace(os.sep, "__")
