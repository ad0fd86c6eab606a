import numpy as np
import pytest

from fqkit.rngs import assign_split, substream


def test_substream_reproducible():
    a = substream(7, "embed-train").standard_normal(5)
    b = substream(7, "embed-train").standard_normal(5)
    assert np.array_equal(a, b)


def test_substream_name_and_seed_independence():
    base = substream(7, "embed-train").standard_normal(5)
    other_name = substream(7, "select-shuffle").standard_normal(5)
    other_seed = substream(8, "embed-train").standard_normal(5)
    assert not np.array_equal(base, other_name)
    assert not np.array_equal(base, other_seed)


def test_assign_split_is_deterministic_and_named():
    ratios = (0.8, 0.1, 0.1)
    names = {assign_split(f"ex{i:04d}", ratios) for i in range(200)}
    assert names == {"train", "validation", "test"}
    assert assign_split("ex0000", ratios) == assign_split("ex0000", ratios)


def test_assign_split_ratio_proportions():
    ratios = (0.8, 0.1, 0.1)
    counts = {"train": 0, "validation": 0, "test": 0}
    for i in range(5000):
        counts[assign_split(f"id-{i}", ratios)] += 1
    assert 0.75 < counts["train"] / 5000 < 0.85
    assert 0.07 < counts["validation"] / 5000 < 0.13
    assert 0.07 < counts["test"] / 5000 < 0.13


def test_assign_split_degenerate_ratios():
    for i in range(50):
        assert assign_split(f"x{i}", (1.0, 0.0, 0.0)) == "train"
        assert assign_split(f"x{i}", (0.0, 0.0, 1.0)) == "test"


def test_assign_split_validates_ratios():
    with pytest.raises(ValueError):
        assign_split("a", (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        assign_split("a", (-0.1, 0.6, 0.5))
    with pytest.raises(ValueError):
        assign_split("a", (0.5, 0.5))
