"""Shared fixtures: a small dialogue-style graph and the synthetic corpus."""

import pytest

from fqkit import synthetic
from fqkit.corpus import CorpusSplit, Example, split_corpus
from fqkit.kg import KnowledgeGraph, Triple


@pytest.fixture(scope="session")
def dialogue_graph() -> KnowledgeGraph:
    """Movie-chat fixture: a song, the film it scored, and their people."""
    triples = [
        Triple("when_im_gone", "release_year", "2002"),
        Triple("when_im_gone", "performer", "eminem"),
        Triple("runaway_jury", "release_year", "2003"),
        Triple("runaway_jury", "director", "Gary Fleder"),
        Triple("runaway_jury", "starring", "John Cusack"),
        Triple("eminem", "spouse", "Kim Scott"),
    ]
    surface = {
        "when_im_gone": ("When I'm Gone", []),
        "runaway_jury": ("The Runaway Jury", ["Runaway Jury"]),
        "eminem": ("Eminem", []),
    }
    return KnowledgeGraph(triples, surface)


@pytest.fixture(scope="session")
def star_graph() -> KnowledgeGraph:
    """Hub with an edge to every other entity; spokes have none."""
    triples = [
        Triple("hub", "linked_to", "spoke_a"),
        Triple("hub", "linked_to", "spoke_b"),
        Triple("hub", "linked_to", "spoke_c"),
        Triple("hub", "linked_to", "spoke_d"),
    ]
    surface = {
        "hub": ("Hub", []),
        "spoke_a": ("Spoke Alpha", []),
        "spoke_b": ("Spoke Beta", []),
        "spoke_c": ("Spoke Gamma", []),
        "spoke_d": ("Spoke Delta", []),
    }
    return KnowledgeGraph(triples, surface)


@pytest.fixture(scope="session")
def synthetic_graph() -> KnowledgeGraph:
    return synthetic.build_graph()


@pytest.fixture(scope="session")
def synthetic_examples(synthetic_graph) -> list[Example]:
    return synthetic.build_corpus(synthetic_graph)


@pytest.fixture(scope="session")
def synthetic_split(synthetic_examples) -> CorpusSplit:
    parts = split_corpus(synthetic_examples, (0.8, 0.1, 0.1))
    return CorpusSplit(parts["train"], parts["validation"], parts["test"])
