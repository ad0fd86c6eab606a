"""Prompt construction, sequence serialization, and a rule-based realizer.

The serialized layout is the generation contract: Q·EOS·A·EOS·P·EOS for
inference and Q·EOS·A·EOS·P·EOS·Y·EOS for training, as one flat string.
Any causal LM stack can consume the exported files; the realizer is a
deterministic stand-in generator so the whole pipeline runs end to end
with no model downloads.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import Example
from .kg import KnowledgeGraph

logger = logging.getLogger(__name__)

DEFAULT_EOS = "<|endoftext|>"
DEFAULT_TEMPLATE = "How to ask about the {relation} of {entity}"
FALLBACK_FRAME = "What is the {relation} of {entity}?"


class GenerationError(ValueError):
    """Raised for malformed templates, sequences, or rule files."""


def render_relation(relation_id: str) -> str:
    """Human-readable relation label: underscores become spaces."""
    return relation_id.replace("_", " ")


def _fill(template: str, entity_name: str, relation_label: str) -> str:
    return template.replace("{entity}", entity_name).replace(
        "{relation}", relation_label
    )


def _check_template(template: str, require_entity_only: bool = False) -> None:
    if template.count("{entity}") != 1:
        raise GenerationError(
            f"template must contain {{entity}} exactly once: {template!r}"
        )
    if not require_entity_only and template.count("{relation}") != 1:
        raise GenerationError(
            f"template must contain {{relation}} exactly once: {template!r}"
        )


def build_prompt(
    graph: KnowledgeGraph,
    entity: str,
    relation: str,
    template: str | None = None,
    override: bool = False,
) -> str:
    """Fill the prompt template with the canonical entity name and the
    rendered relation label.

    Unless override is set, the (entity, relation) pair must be a real
    edge, so prompts are truthful by construction.
    """
    template = template if template is not None else DEFAULT_TEMPLATE
    _check_template(template)
    if not override and not graph.has_edge(entity, relation):
        raise GenerationError(
            f"no edge ({entity!r}, {relation!r}); pass override to prompt anyway"
        )
    return _fill(template, graph.canonical_name(entity), render_relation(relation))


# -- serialization ---------------------------------------------------------


@dataclass(frozen=True)
class SerializedSequence:
    """One flat training/inference string with segment spans.

    Each span is (name, start, end) where end includes the trailing eos
    token, so the spans tile the whole string; the segment text itself is
    text[start : end - len(eos)].
    """

    text: str
    spans: tuple[tuple[str, int, int], ...]
    eos: str

    def segment(self, name: str) -> str:
        for span_name, start, end in self.spans:
            if span_name == name:
                return self.text[start : end - len(self.eos)]
        raise KeyError(f"no segment {name!r}")


def serialize(
    question: str,
    answer: str,
    prompt: str,
    followup: str | None = None,
    eos: str = DEFAULT_EOS,
) -> SerializedSequence:
    if not eos:
        raise GenerationError("eos token must be non-empty")
    segments = [("question", question), ("answer", answer), ("prompt", prompt)]
    if followup is not None:
        segments.append(("followup", followup))
    for name, value in segments:
        if not value:
            raise GenerationError(f"empty {name} segment")
        if eos in value:
            raise GenerationError(f"eos token occurs inside the {name} segment")
    parts: list[str] = []
    spans: list[tuple[str, int, int]] = []
    offset = 0
    for name, value in segments:
        piece = value + eos
        spans.append((name, offset, offset + len(piece)))
        parts.append(piece)
        offset += len(piece)
    return SerializedSequence("".join(parts), tuple(spans), eos)


def parse_sequence(text: str, eos: str = DEFAULT_EOS) -> dict[str, str]:
    """Invert serialize: recover the named segments from one flat string."""
    if not eos:
        raise GenerationError("eos token must be non-empty")
    if not text.endswith(eos):
        raise GenerationError("sequence does not end with the eos token")
    body = text[: -len(eos)]
    parts = body.split(eos)
    if len(parts) == 3:
        names = ("question", "answer", "prompt")
    elif len(parts) == 4:
        names = ("question", "answer", "prompt", "followup")
    else:
        raise GenerationError(
            f"expected 3 or 4 segments, found {len(parts)}"
        )
    if any(not p for p in parts):
        raise GenerationError("empty segment in serialized sequence")
    return dict(zip(names, parts))


# -- realizer --------------------------------------------------------------


def load_rules(path: str | Path) -> list[tuple[str, str]]:
    """Realizer rules TSV: relation_pattern<TAB>frame, in file order."""
    rules: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise GenerationError(
                    f"{path}:{lineno}: expected pattern<TAB>frame"
                )
            pattern, frame = fields[0].strip(), fields[1].strip()
            if not pattern or not frame:
                raise GenerationError(f"{path}:{lineno}: empty pattern or frame")
            _check_template(frame, require_entity_only=True)
            rules.append((pattern, frame))
    return rules


def default_rules() -> list[tuple[str, str]]:
    path = resources.files("fqkit").joinpath("data/realizer_rules.tsv")
    with resources.as_file(path) as concrete:
        return load_rules(concrete)


def realize_question(
    graph: KnowledgeGraph,
    entity: str,
    relation: str,
    rules: list[tuple[str, str]] | None = None,
) -> str:
    """Deterministic surface question for an (entity, relation) pair.

    The first rule whose pattern is a substring of the relation id
    supplies the frame; otherwise the fallback frame applies. Every
    realization names the entity canonically, so it links back to the
    entity it was generated from.
    """
    if rules is None:
        rules = default_rules()
    name = graph.canonical_name(entity)
    label = render_relation(relation)
    for pattern, frame in rules:
        if pattern in relation:
            question = _fill(frame, name, label)
            break
    else:
        question = _fill(FALLBACK_FRAME, name, label)
    if not question.endswith("?"):
        question += "?"
    return question


# -- fine-tune export and generated-output import --------------------------


def export_finetune(
    examples: list[Example],
    graph: KnowledgeGraph,
    eos: str = DEFAULT_EOS,
    template: str | None = None,
    inference: bool = False,
) -> tuple[list[str], list[str], list[dict]]:
    """Serialized sequences for an external generator, ordered by id.

    Training form includes the target follow-up; inference form stops at
    the prompt. Returns (lines, ids, skipped) where skipped lists
    {id, reason} for examples that violate serialization preconditions.
    """
    lines: list[str] = []
    ids: list[str] = []
    skipped: list[dict] = []
    for ex in sorted(examples, key=lambda e: e.id):
        try:
            prompt = build_prompt(graph, ex.gold_entity, ex.gold_relation, template)
            followup = None
            if not inference:
                if ex.followup is None:
                    raise GenerationError("example has no target follow-up")
                followup = ex.followup
            seq = serialize(ex.question, ex.answer, prompt, followup, eos)
        except (GenerationError, KeyError) as exc:
            logger.warning("export: skipping %s (%s)", ex.id, exc)
            skipped.append({"id": ex.id, "reason": str(exc)})
            continue
        lines.append(seq.text)
        ids.append(ex.id)
    return lines, ids, skipped


def read_generated(path: str | Path) -> dict[str, str]:
    """Generated-output import: JSONL {id, question}."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            if "id" not in record or "question" not in record:
                raise GenerationError(f"{path}:{lineno}: expected {{id, question}}")
            if record["id"] in out:
                raise GenerationError(f"{path}:{lineno}: duplicate id {record['id']!r}")
            out[record["id"]] = record["question"]
    return out
