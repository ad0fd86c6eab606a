"""Versioned JSON containers for model checkpoints and reports.

A checkpoint stores flat float64 value arrays keyed by parameter name,
together with shapes, the producing config, and free-form extras (e.g. a
vocabulary). Loading validates the format version and every shape, so a
truncated or mismatched file fails loudly instead of mis-deserializing.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable, mislabeled, or shape-mismatched containers."""


def save_checkpoint(
    path: str | Path,
    kind: str,
    params: dict[str, np.ndarray],
    config: dict | None = None,
    extra: dict | None = None,
) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config or {},
        "extra": extra or {},
        "params": {
            name: {
                "shape": list(np.asarray(values).shape),
                "values": np.asarray(values, dtype=np.float64).reshape(-1).tolist(),
            }
            for name, values in params.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str | Path, kind: str | None = None) -> dict:
    """Load a container; returns {kind, config, extra, params} with params
    as float64 arrays restored to their stored shapes."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path}: not a checkpoint container")
    if payload["format_version"] != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {payload['format_version']}"
        )
    if kind is not None and payload.get("kind") != kind:
        raise CheckpointError(
            f"{path}: expected kind {kind!r}, found {payload.get('kind')!r}"
        )
    params: dict[str, np.ndarray] = {}
    for name, entry in payload.get("params", {}).items():
        shape = tuple(entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        expected = int(np.prod(shape)) if shape else 1
        if values.size != expected:
            raise CheckpointError(
                f"{path}: parameter {name!r} has {values.size} values, "
                f"shape {shape} needs {expected}"
            )
        params[name] = values.reshape(shape)
    return {
        "kind": payload.get("kind"),
        "config": payload.get("config", {}),
        "extra": payload.get("extra", {}),
        "params": params,
    }
