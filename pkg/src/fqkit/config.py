"""Run configuration: YAML file, flag overrides, and the config hash.

A run is described by one nested mapping. ``load_config`` deep-merges a
YAML file over the defaults and rejects unknown keys so typos fail
loudly instead of silently using a default. Every artifact a command
writes embeds ``{version, config_hash, seed}``, where the hash covers
the fully resolved configuration; reruns with the same inputs therefore
produce byte-identical files.
"""

from __future__ import annotations

import copy
import hashlib
import json

import yaml

from . import __version__

DEFAULTS: dict = {
    "seed": 0,
    "kg": {
        "triples": None,
        "surface": None,
    },
    "corpus": {
        "path": None,
        "ratios": [0.8, 0.1, 0.1],
    },
    "embed": {
        "family": "transE",
        "dim": 400,
        "margin": 1.0,
        "negatives": 1,
        "epochs": 200,
        "lr": 0.01,
        "norm": "L2",
    },
    "select": {
        "variant": "mlp",
        "epochs": 50,
        "batch_size": 20,
        "patience": 10,
        "lr": 4e-5,
        "hidden_dim": 600,
        "token_dim": 32,
        "ctx_dim": 32,
        "d_k": 32,
        "min_count": 1,
        "context_vectors": None,
        "ks": [1, 3, 5],
        "split": "test",
    },
    "gen": {
        "eos": "<|endoftext|>",
        "template": None,
        "rules": None,
        "split": "train",
    },
    "score": {
        "rel_mode": "gold",
        "lm_order": 3,
        "lm_lambdas": None,
        "lm_min_count": 2,
        "epochs": 50,
        "batch_size": 20,
        "patience": 10,
        "lr": 0.01,
        "hidden_dim": 96,
        "token_dim": 32,
        "ctx_dim": 32,
        "min_count": 1,
    },
}


class ConfigError(ValueError):
    """Raised for unreadable files, unknown keys, or bad override paths."""


def _merge(base: dict, override: dict, path: str) -> None:
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping")
            _merge(base[key], value, where)
        else:
            base[key] = value


def load_config(path: str | None = None) -> dict:
    """Defaults, with the YAML file at ``path`` merged over them."""
    config = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config root must be a mapping")
        _merge(config, loaded, "")
    return config


def set_key(config: dict, dotted: str, value) -> None:
    """Set one value by dotted path, e.g. ``embed.dim``. The key must
    already exist in the tree."""
    parts = dotted.split(".")
    node = config
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key: {dotted}")
    node[parts[-1]] = value


def apply_overrides(config: dict, overrides: dict) -> None:
    """Apply {dotted_key: value} pairs, skipping None values so unset
    CLI flags leave the file/default value in place."""
    for dotted, value in overrides.items():
        if value is not None:
            set_key(config, dotted, value)


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of the resolved config."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def stamp(config: dict) -> dict:
    """The provenance block embedded in every artifact."""
    return {
        "version": __version__,
        "config_hash": config_hash(config),
        "seed": config["seed"],
    }
