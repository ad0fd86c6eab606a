"""Dialogue corpus model.

A corpus is a JSONL file with one example per line. Required fields:
``id``, ``question``, ``answer``, ``mentions`` (list of entity ids),
``gold_entity``, ``gold_relation``. The ``followup`` field is optional;
examples without it can still be scored and used for inference-form
serialization but not as generation training targets.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from .rngs import assign_split

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Raised for malformed corpus files."""


@dataclass
class Example:
    id: str
    question: str
    answer: str
    mentions: list[str]
    gold_entity: str
    gold_relation: str
    followup: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["followup"] is None:
            del d["followup"]
        return d


_REQUIRED = ("id", "question", "answer", "mentions", "gold_entity", "gold_relation")


def example_from_dict(record: dict, where: str = "record") -> Example:
    for name in _REQUIRED:
        if name not in record:
            raise CorpusError(f"{where}: missing field {name!r}")
    mentions = record["mentions"]
    if not isinstance(mentions, list) or not all(isinstance(m, str) for m in mentions):
        raise CorpusError(f"{where}: 'mentions' must be a list of entity ids")
    for name in ("id", "question", "answer", "gold_entity", "gold_relation"):
        if not isinstance(record[name], str) or not record[name]:
            raise CorpusError(f"{where}: {name!r} must be a non-empty string")
    followup = record.get("followup")
    if followup is not None and not isinstance(followup, str):
        raise CorpusError(f"{where}: 'followup' must be a string when present")
    return Example(
        id=record["id"],
        question=record["question"],
        answer=record["answer"],
        mentions=list(mentions),
        gold_entity=record["gold_entity"],
        gold_relation=record["gold_relation"],
        followup=followup,
    )


def read_corpus(path: str | Path) -> list[Example]:
    examples: list[Example] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            example = example_from_dict(record, where=f"{path}:{lineno}")
            if example.id in seen_ids:
                raise CorpusError(f"{path}:{lineno}: duplicate example id {example.id!r}")
            seen_ids.add(example.id)
            examples.append(example)
    logger.debug("read %d examples from %s", len(examples), path)
    return examples


def write_corpus(path: str | Path, examples: list[Example]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(example.to_dict(), sort_keys=True) + "\n")


def split_corpus(
    examples: list[Example], ratios: tuple[float, float, float]
) -> dict[str, list[Example]]:
    """Partition by id hash; membership is independent of corpus order."""
    parts: dict[str, list[Example]] = {"train": [], "validation": [], "test": []}
    for example in examples:
        parts[assign_split(example.id, ratios)].append(example)
    return parts


@dataclass
class CorpusSplit:
    train: list[Example]
    validation: list[Example]
    test: list[Example]

    def all_examples(self) -> list[Example]:
        return self.train + self.validation + self.test

    def part(self, name: str) -> list[Example]:
        if name not in ("train", "validation", "test"):
            raise ValueError(f"unknown split: {name!r}")
        return getattr(self, name)


def check_example(example: Example, graph) -> str | None:
    """Return the drop reason for an example, or None when it is valid.

    Validity means: gold entity and every mention resolve as graph
    entities, the gold entity is among the mentions, and the gold relation
    is an outgoing relation of the gold entity.
    """
    if not graph.is_entity(example.gold_entity):
        return f"unknown gold_entity {example.gold_entity!r}"
    for mention in example.mentions:
        if not graph.is_entity(mention):
            return f"unknown mention {mention!r}"
    if example.gold_entity not in example.mentions:
        return "gold_entity not in mentions"
    if not graph.has_edge(example.gold_entity, example.gold_relation):
        return (
            f"gold_relation {example.gold_relation!r} is not an outgoing "
            f"relation of {example.gold_entity!r}"
        )
    return None


def load_corpus(
    path: str | Path,
    graph,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> tuple[CorpusSplit, list[dict]]:
    """Read, validate, and split a corpus file against its graph.

    Invalid examples are dropped, not fatal; the returned drop report
    lists {id, reason} per dropped example. More than half the file being
    invalid signals a mismatched graph/corpus pairing and is an error.
    """
    examples = read_corpus(path)
    kept: list[Example] = []
    drops: list[dict] = []
    for example in examples:
        reason = check_example(example, graph)
        if reason is None:
            kept.append(example)
        else:
            logger.debug("dropping %s: %s", example.id, reason)
            drops.append({"id": example.id, "reason": reason})
    if examples and len(drops) * 2 > len(examples):
        raise CorpusError(
            f"{len(drops)} of {len(examples)} examples invalid; "
            "corpus and graph do not appear to belong together"
        )
    parts = split_corpus(kept, ratios)
    split = CorpusSplit(parts["train"], parts["validation"], parts["test"])
    return split, drops


def write_drop_report(path: str | Path, drops: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for drop in drops:
            fh.write(json.dumps(drop, sort_keys=True) + "\n")


def corpus_stats(split: CorpusSplit, graph) -> dict:
    """Example counts plus mention and relation averages.

    Average relations per mentioned entity is taken over the set of
    distinct mentioned entities, each counted once.
    """
    examples = split.all_examples()
    mentioned: set[str] = set()
    total_mentions = 0
    for example in examples:
        mentioned.update(example.mentions)
        total_mentions += len(example.mentions)
    known = sorted(e for e in mentioned if graph.is_entity(e))
    avg_relations = (
        sum(len(graph.relations_of(e)) for e in known) / len(known) if known else 0.0
    )
    return {
        "n_examples": {
            "train": len(split.train),
            "validation": len(split.validation),
            "test": len(split.test),
            "total": len(examples),
        },
        "n_unique_entities": len(mentioned),
        "avg_mentions_per_example": total_mentions / len(examples) if examples else 0.0,
        "avg_relations_per_mentioned_entity": avg_relations,
    }


