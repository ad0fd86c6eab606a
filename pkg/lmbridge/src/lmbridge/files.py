"""Readers and writers for the toolkit's file interfaces.

The bridge talks to the main toolkit only through these formats: the
questions file (JSONL {id, context: {question, answer}, question}), the
fine-tune export (one serialized sequence per line, segments terminated
by the eos token), its ids side file, and the external score files
(JSONL with a {"_meta": ...} header line the toolkit skips).
"""

import json
from pathlib import Path


def read_questions(path) -> list[dict]:
    records: list[dict] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            if "_meta" in record:
                continue
            context = record.get("context")
            if (
                not isinstance(record.get("id"), str)
                or not isinstance(record.get("question"), str)
                or not isinstance(context, dict)
                or not isinstance(context.get("question"), str)
                or not isinstance(context.get("answer"), str)
            ):
                raise ValueError(
                    f"{path}:{lineno}: expected "
                    "{id, context: {question, answer}, question}"
                )
            if record["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {record['id']!r}")
            seen.add(record["id"])
            records.append(record)
    if not records:
        raise ValueError(f"{path}: no records")
    return records


def read_export(path, eos: str) -> list[dict]:
    """Fine-tune export lines as {question, answer, prompt, followup}."""
    entries: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split(eos)
            if len(parts) != 5 or parts[4] != "" or any(not p for p in parts[:4]):
                raise ValueError(
                    f"{path}:{lineno + 1}: export file malformed, expected "
                    "four eos-terminated segments"
                )
            entries.append(
                {
                    "question": parts[0],
                    "answer": parts[1],
                    "prompt": parts[2],
                    "followup": parts[3],
                }
            )
    if not entries:
        raise ValueError(f"{path}: no sequences")
    return entries


def read_ids(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    ids = payload.get("ids") if isinstance(payload, dict) else None
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
        raise ValueError(f"{path}: expected an object with an 'ids' string list")
    return ids


def write_jsonl(path, meta: dict | None, records: list[dict]) -> None:
    """One record per line, with a _meta header when given.

    Score files carry the header (the toolkit skips it); the generated
    questions file must not, since the questions reader validates every
    line against its schema.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
