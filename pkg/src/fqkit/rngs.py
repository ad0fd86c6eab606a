"""Deterministic random-stream management.

All stochastic behaviour in the toolkit flows from a single integer seed.
Each pipeline stage draws from its own named substream so that adding or
reordering stages never perturbs the draws seen by the others, and so that
a rerun with the same seed is bit-for-bit identical.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _spawn_key(name: str) -> tuple[int, ...]:
    # Stable 16-byte digest, split into four uint32 words.
    digest = hashlib.sha256(name.encode("utf-8")).digest()[:16]
    return tuple(int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4))


def substream(seed: int, name: str) -> np.random.Generator:
    """Return the generator for the named substream of ``seed``.

    The same (seed, name) pair always yields an identical stream; distinct
    names yield statistically independent streams.
    """
    seq = np.random.SeedSequence(entropy=seed, spawn_key=_spawn_key(name))
    return np.random.Generator(np.random.PCG64(seq))


def assign_split(example_id: str, ratios: tuple[float, float, float]) -> str:
    """Deterministically assign an example id to train/validation/test.

    The first 8 bytes of sha256(id), read big-endian, are reduced mod 1000
    and compared against cumulative ratio thresholds. Assignment therefore
    depends only on the id, never on corpus order or the global seed.

    Ratios must be non-negative and sum to 1 (within float tolerance);
    zero entries are allowed so e.g. (1, 0, 0) sends everything to train.
    """
    names = ("train", "validation", "test")
    if len(ratios) != 3:
        raise ValueError("expected exactly three split ratios")
    if any(r < 0 for r in ratios):
        raise ValueError("split ratios must be non-negative")
    total = sum(ratios)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {total}")
    digest = hashlib.sha256(example_id.encode("utf-8")).digest()
    bucket = int.from_bytes(digest[:8], "big") % 1000
    cumulative = 0.0
    for name, ratio in zip(names, ratios):
        cumulative += ratio * 1000.0
        # Epsilon absorbs float drift in the running sum so that nominal
        # thresholds like 0.8 -> 800 land on exact bucket boundaries.
        if ratio > 0 and bucket < cumulative - 1e-9:
            return name
    # Rounding left the top bucket unclaimed; it belongs to the last
    # nonzero stage.
    for name, ratio in reversed(list(zip(names, ratios))):
        if ratio > 0:
            return name
    raise ValueError("all split ratios are zero")
