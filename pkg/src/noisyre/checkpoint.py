"""Directory checkpoints: ``manifest.json`` plus one little-endian float64 file per parameter."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autodiff import ParamStore

FORMAT_VERSION = 1
DTYPE_TAG = "float64-le"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: ParamStore, step: int, seed: int, meta: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, t in params.items():
        fname = f"{name}.bin"
        (path / fname).write_bytes(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        entries.append({"name": name, "shape": list(t.shape), "file": fname,
                        "trainable": bool(t.requires_grad)})
    manifest = {
        "format_version": FORMAT_VERSION,
        "dtype": DTYPE_TAG,
        "step": int(step),
        "seed": int(seed),
        "parameters": entries,
        "meta": meta or {},
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    mpath = Path(path) / "manifest.json"
    if not mpath.is_file():
        raise CheckpointError(f"no manifest.json in {path}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')!r}")
    if manifest.get("dtype") != DTYPE_TAG:
        raise CheckpointError(f"unsupported dtype tag {manifest.get('dtype')!r}")
    return manifest


def load_checkpoint(path) -> tuple[ParamStore, dict]:
    path = Path(path)
    manifest = read_manifest(path)
    params = ParamStore()
    for entry in manifest["parameters"]:
        raw = (path / entry["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        shape = tuple(entry["shape"])
        if arr.size != int(np.prod(shape)):
            raise CheckpointError(f"{entry['file']}: {arr.size} values do not fill shape {shape}")
        params.add(entry["name"], arr.reshape(shape), trainable=entry.get("trainable", True))
    return params, manifest
