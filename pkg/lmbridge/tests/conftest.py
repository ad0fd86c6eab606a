"""Shared fixtures: a toolkit workspace built through the fqkit CLI.

The bridge talks to the toolkit only through files, so the fixtures
produce those files the same way a user would, by running the installed
`fqkit` binary as a subprocess.
"""

import json
import shutil
import subprocess

import pytest
import yaml

FQKIT = shutil.which("fqkit")

NAMES = {
    "when_im_gone": "When I'm Gone",
    "runaway_jury": "The Runaway Jury",
    "eminem": "Eminem",
}
RELS = {
    "when_im_gone": ["release_year", "performer"],
    "runaway_jury": ["release_year", "director", "starring"],
    "eminem": ["spouse"],
}
FRAMES = {
    "release_year": "When was {} released?",
    "performer": "Who performed {}?",
    "director": "Who directed {}?",
    "starring": "Who starred in {}?",
    "spouse": "Who is the spouse of {}?",
}


def run_fqkit(args, cwd):
    assert FQKIT, "fqkit binary not on PATH; install the toolkit first"
    return subprocess.run(
        [FQKIT, *args], cwd=cwd, capture_output=True, text=True, timeout=300
    )


@pytest.fixture(scope="session")
def fqkit_cli():
    """The installed toolkit binary, as a run(args, cwd) callable."""
    return run_fqkit


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """Corpus, config, questions, and the fine-tune export artifacts."""
    root = tmp_path_factory.mktemp("bridgews")
    (root / "triples.tsv").write_text(
        "when_im_gone\trelease_year\t2002\n"
        "when_im_gone\tperformer\teminem\n"
        "runaway_jury\trelease_year\t2003\n"
        "runaway_jury\tdirector\tGary Fleder\n"
        "runaway_jury\tstarring\tJohn Cusack\n"
        "eminem\tspouse\tKim Scott\n"
    )
    (root / "surface.tsv").write_text(
        "when_im_gone\tWhen I'm Gone\n"
        "runaway_jury\tThe Runaway Jury\tRunaway Jury\n"
        "eminem\tEminem\n"
    )
    entities = list(NAMES)
    lines = []
    for i in range(60):
        eid = entities[i % 3]
        rel = RELS[eid][(i // 3) % len(RELS[eid])]
        name = NAMES[eid]
        lines.append(
            json.dumps(
                {
                    "id": f"x{i:03d}",
                    "question": f"Tell me about {name}.",
                    "answer": f"{name} is worth discussing.",
                    "mentions": sorted({eid, entities[(i + 1) % 3]}),
                    "gold_entity": eid,
                    "gold_relation": rel,
                    "followup": FRAMES[rel].format(name),
                }
            )
        )
    (root / "corpus.jsonl").write_text("\n".join(lines) + "\n")
    (root / "config.yaml").write_text(
        yaml.safe_dump(
            {
                "seed": 0,
                "kg": {"triples": "triples.tsv", "surface": "surface.tsv"},
                "corpus": {"path": "corpus.jsonl"},
                "score": {
                    "epochs": 2, "hidden_dim": 12, "token_dim": 8,
                    "ctx_dim": 8, "lm_min_count": 1,
                },
            }
        )
    )
    questions = []
    for i in range(3):
        eid = entities[i]
        name = NAMES[eid]
        questions.append(
            {
                "id": f"x{i:03d}",
                "context": {
                    "question": f"Tell me about {name}.",
                    "answer": f"{name} is worth discussing.",
                },
                "question": FRAMES[RELS[eid][i % len(RELS[eid])]].format(name),
            }
        )
    (root / "questions.jsonl").write_text(
        "\n".join(json.dumps(q) for q in questions) + "\n"
    )

    result = run_fqkit(
        ["gen", "export", "--ids-out", "out/finetune_ids.json",
         "--config", "config.yaml", "--out", "out"],
        cwd=root,
    )
    assert result.returncode == 0, result.stderr
    return root


@pytest.fixture(scope="session")
def finetuned(workspace):
    """One bridge finetune run: model directory plus generated questions."""
    from lmbridge.cli import main

    out = workspace / "bridge_run"
    code = main(
        ["finetune", "--in", str(workspace / "out" / "finetune.txt"),
         "--ids", str(workspace / "out" / "finetune_ids.json"),
         "--out", str(out), "--model", "gru-causal"]
    )
    assert code == 0
    return out
