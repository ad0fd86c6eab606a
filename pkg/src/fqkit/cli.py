"""Command-line pipeline driver.

Every command resolves one configuration (defaults, then the YAML file
given by --config, then explicit flags), writes its artifacts under
--out, and prints a one-line JSON summary on stdout. Artifacts embed
{version, config_hash, seed} and contain no timestamps, so rerunning a
command with the same inputs reproduces the files byte for byte.

Errors come out as a single JSON line on stderr and a nonzero exit
status. The FQKIT_LOG environment variable (DEBUG, INFO, ...) controls
diagnostic logging, which also goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import generation, gricean, metrics, selection
from .config import ConfigError, apply_overrides, load_config, stamp
from .embeddings import EmbedTrainConfig, EmbeddingTable, link_prediction_eval, train_embeddings
from .kg import KnowledgeGraph
from .nn import TrainConfig

logger = logging.getLogger(__name__)


class UsageError(ValueError):
    """Bad command line; exits with status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _graph(config: dict) -> KnowledgeGraph:
    triples_path = config["kg"]["triples"]
    if not triples_path:
        raise ConfigError("kg.triples is not set")
    return KnowledgeGraph.from_files(triples_path, config["kg"]["surface"])


def _corpus(config: dict, graph: KnowledgeGraph, out: Path):
    path = config["corpus"]["path"]
    if not path:
        raise ConfigError("corpus.path is not set")
    ratios = tuple(config["corpus"]["ratios"])
    split, drops = corpus_mod.load_corpus(path, graph, ratios)
    corpus_mod.write_drop_report(out / "corpus_drops.jsonl", drops)
    return split, drops


def _select_train_cfg(config: dict) -> TrainConfig:
    section = config["select"]
    return TrainConfig(
        epochs=section["epochs"],
        batch_size=section["batch_size"],
        patience=section["patience"],
        seed=config["seed"],
        hidden_dim=section["hidden_dim"],
        lr=section["lr"],
        token_dim=section["token_dim"],
        ctx_dim=section["ctx_dim"],
        d_k=section["d_k"],
        min_count=section["min_count"],
    )


def _score_train_cfg(config: dict) -> TrainConfig:
    section = config["score"]
    return TrainConfig(
        epochs=section["epochs"],
        batch_size=section["batch_size"],
        patience=section["patience"],
        seed=config["seed"],
        lr=section["lr"],
        hidden_dim=section["hidden_dim"],
        token_dim=section["token_dim"],
        ctx_dim=section["ctx_dim"],
        min_count=section["min_count"],
    )


def _comma_ints(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc
    if not values:
        raise UsageError("expected at least one integer")
    return values


def _comma_floats(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    return values


# -- commands --------------------------------------------------------------


def cmd_kg_build(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    payload = {
        **stamp(config),
        "stats": graph.stats(),
        "triples": [[t.head, t.relation, t.tail] for t in graph.triples],
        "surface": {
            e: [graph.canonical_name(e), list(graph.aliases(e)[1:])]
            for e in graph.entities
        },
    }
    _write_json(out / "kg.json", payload)
    _emit({"artifact": "kg.json", "n_triples": len(graph.triples)})


def cmd_kg_stats(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    payload = {**stamp(config), **graph.stats()}
    _write_json(out / "kg_stats.json", payload)
    _emit({"artifact": "kg_stats.json", "n_entities": payload["n_entities"]})


def cmd_embed_train(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    section = config["embed"]
    cfg = EmbedTrainConfig(
        family=section["family"],
        dim=section["dim"],
        margin=section["margin"],
        negatives=section["negatives"],
        epochs=section["epochs"],
        lr=section["lr"],
        norm=section["norm"],
        seed=config["seed"],
    )
    table, losses = train_embeddings(graph, cfg)
    table.save(out / "embedding.json", config=stamp(config))
    payload = {
        **stamp(config),
        "family": cfg.family,
        "dim": cfg.dim,
        "epochs": cfg.epochs,
        "final_loss": losses[-1],
        "losses": losses,
    }
    _write_json(out / "embed_train.json", payload)
    _emit({"artifact": "embedding.json", "final_loss": losses[-1]})


def cmd_embed_eval(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    checkpoint = args.checkpoint or out / "embedding.json"
    table = EmbeddingTable.load(checkpoint)
    result = link_prediction_eval(table, graph, list(graph.triples))
    payload = {**stamp(config), **result}
    _write_json(out / "embed_eval.json", payload)
    _emit({"artifact": "embed_eval.json", "mrr": result["mrr"]})


def cmd_select_train(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    split, drops = _corpus(config, graph, out)
    checkpoint = args.embedding_checkpoint or out / "embedding.json"
    table = EmbeddingTable.load(checkpoint)
    cfg = _select_train_cfg(config)
    vectors_path = config["select"]["context_vectors"]
    vectors = selection.read_context_vectors(vectors_path) if vectors_path else None
    model, report = selection.train_selector(
        split, graph, table, cfg, config["select"]["variant"], vectors
    )
    model.save(out / "selector.json", config=stamp(config))
    payload = {**stamp(config), **report, "corpus_drops": len(drops)}
    _write_json(out / "select_train.json", payload)
    _emit({"artifact": "selector.json", "best_epoch": report["best_epoch"]})


def cmd_select_eval(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    split, _ = _corpus(config, graph, out)
    table = EmbeddingTable.load(args.embedding_checkpoint or out / "embedding.json")
    model = selection.SelectorModel.load(args.checkpoint or out / "selector.json")
    vectors_path = config["select"]["context_vectors"]
    vectors = selection.read_context_vectors(vectors_path) if vectors_path else None
    examples = split.part(config["select"]["split"])
    result = selection.evaluate(
        model, examples, graph, table, tuple(config["select"]["ks"]), vectors
    )
    payload = {**stamp(config), "split": config["select"]["split"], **result}
    _write_json(out / "select_eval.json", payload)
    _emit({"artifact": "select_eval.json", "n_evaluated": result["n_evaluated"]})


def cmd_gen_prompt(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    prompt = generation.build_prompt(
        graph,
        args.entity,
        args.relation,
        template=config["gen"]["template"],
        override=args.override,
    )
    payload = {
        **stamp(config),
        "entity": args.entity,
        "relation": args.relation,
        "prompt": prompt,
    }
    _write_json(out / "gen_prompt.json", payload)
    _emit({"artifact": "gen_prompt.json", "prompt": prompt})


def cmd_gen_realize(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    rules = generation.load_rules(args.rules) if args.rules else None
    question = generation.realize_question(graph, args.entity, args.relation, rules)
    payload = {
        **stamp(config),
        "entity": args.entity,
        "relation": args.relation,
        "question": question,
    }
    _write_json(out / "gen_realize.json", payload)
    _emit({"artifact": "gen_realize.json", "question": question})


def cmd_gen_export(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    split, _ = _corpus(config, graph, out)
    examples = split.part(config["gen"]["split"])
    lines, ids, skipped = generation.export_finetune(
        examples,
        graph,
        eos=config["gen"]["eos"],
        template=config["gen"]["template"],
        inference=args.inference,
    )
    sequences_path = out / "finetune.txt"
    sequences_path.parent.mkdir(parents=True, exist_ok=True)
    with open(sequences_path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
    if args.ids_out:
        _write_json(Path(args.ids_out), {**stamp(config), "ids": ids})
    payload = {
        **stamp(config),
        "split": config["gen"]["split"],
        "inference": bool(args.inference),
        "n_sequences": len(lines),
        "n_skipped": len(skipped),
        "skipped": skipped,
    }
    _write_json(out / "gen_export.json", payload)
    _emit({"artifact": "finetune.txt", "n_sequences": len(lines)})


def cmd_score_gricean(config: dict, args, out: Path) -> None:
    graph = _graph(config)
    split, _ = _corpus(config, graph, out)
    questions = gricean.read_questions_file(args.questions)
    section = config["score"]

    scorers_dir = Path(args.scorers_dir) if args.scorers_dir else out / "scorers"
    if args.fit_scorers:
        cfg = _score_train_cfg(config)
        lambdas = section["lm_lambdas"]
        predictor, lm, coherence, fit_report = gricean.fit_scorers(
            split,
            graph,
            cfg,
            lm_order=section["lm_order"],
            lm_lambdas=tuple(lambdas) if lambdas else None,
            lm_min_count=section["lm_min_count"],
        )
        scorers_dir.mkdir(parents=True, exist_ok=True)
        predictor.save(scorers_dir / "relation_predictor.json", config=stamp(config))
        lm.save(scorers_dir / "ngram_lm.json", config=stamp(config))
        coherence.save(scorers_dir / "coherence.json", config=stamp(config))
        _write_json(out / "scorer_fit.json", {**stamp(config), **fit_report})
    else:
        predictor = gricean.RelationPredictor.load(scorers_dir / "relation_predictor.json")
        lm = gricean.NGramLM.load(scorers_dir / "ngram_lm.json")
        coherence = gricean.CoherenceClassifier.load(scorers_dir / "coherence.json")

    external_cla = gricean.read_clarity_file(args.cla_external) if args.cla_external else None
    external_coh = gricean.read_coherence_file(args.coh_external) if args.coh_external else None
    examples_by_id = {ex.id: ex for ex in split.all_examples()}
    result = gricean.score_all(
        graph,
        questions,
        examples_by_id,
        predictor,
        lm=lm,
        coherence=coherence,
        rel_mode=section["rel_mode"],
        external_cla=external_cla,
        external_coh=external_coh,
    )
    payload = {**stamp(config), **result}
    _write_json(out / "gricean.json", payload)
    _emit({"artifact": "gricean.json", "aggregates": result["aggregates"]})


def cmd_score_rouge(config: dict, args, out: Path) -> None:
    pairs = metrics.read_pairs_file(args.pairs)
    result = metrics.rouge_report(pairs)
    payload = {**stamp(config), **result}
    _write_json(out / "rouge.json", payload)
    _emit({"artifact": "rouge.json", "rouge1_f1": result["means"]["rouge1"]["f1"]})


def cmd_stats_anova(config: dict, args, out: Path) -> None:
    groups = metrics.read_groups_file(args.groups)
    result = metrics.anova_oneway(list(groups.values()))
    payload = {**stamp(config), "groups": sorted(groups), **result}
    _write_json(out / "anova.json", payload)
    _emit({"artifact": "anova.json", "f": result["f"]})


def cmd_stats_alpha(config: dict, args, out: Path) -> None:
    ratings = metrics.read_ratings_csv(args.ratings)
    alpha = metrics.krippendorff_alpha(ratings, level=args.level)
    payload = {
        **stamp(config),
        "level": args.level,
        "n_raters": len(ratings),
        "n_items": len(ratings[0]),
        "alpha": alpha,
    }
    _write_json(out / "alpha.json", payload)
    _emit({"artifact": "alpha.json", "alpha": alpha})


REPORT_SECTIONS = {
    "kg_stats.json": ("n_triples", "n_entities", "n_relations", "out_degree_histogram"),
    "embed_train.json": ("family", "final_loss"),
    "embed_eval.json": ("mrr", "hits", "random_baseline"),
    "select_train.json": ("epochs_run", "best_epoch"),
    "select_eval.json": ("entity", "relation"),
    "gen_export.json": ("n_sequences", "n_skipped"),
    "gricean.json": ("n_questions", "aggregates"),
    "rouge.json": ("n_pairs", "means"),
    "anova.json": ("f", "df_between", "df_within"),
    "alpha.json": ("level", "alpha"),
}

STAMP_KEYS = ("version", "config_hash", "seed")

# Bulky per-record arrays are left out of the roll-up report.
REPORT_EXCLUDE = ("records", "losses", "train_loss", "val_loss", "val_accuracy",
                  "val_recall1", "skipped", "triples", "surface")


def cmd_report(config: dict, args, out: Path) -> None:
    sections = {}
    for filename, required in sorted(REPORT_SECTIONS.items()):
        path = out / filename
        if not path.exists():
            continue
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        for key in (*STAMP_KEYS, *required):
            if key not in payload:
                raise ValueError(f"{filename} is missing required key {key!r}")
        sections[filename.removesuffix(".json")] = {
            k: v for k, v in payload.items() if k not in REPORT_EXCLUDE
        }
    if not sections:
        raise ValueError(f"no pipeline artifacts found under {out}")
    payload = {**stamp(config), "sections": sections}
    for key in STAMP_KEYS:
        if key not in payload:
            raise ValueError(f"report is missing required key {key!r}")
    _write_json(out / "report.json", payload)
    _emit({"artifact": "report.json", "n_sections": len(sections)})


# -- argument wiring -------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default="out", help="artifact directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="fqkit", description=__doc__)
    top = parser.add_subparsers(dest="group", required=True)

    kg = top.add_parser("kg", help="knowledge-graph commands").add_subparsers(
        dest="action", required=True
    )
    for name, fn in (("build", cmd_kg_build), ("stats", cmd_kg_stats)):
        sub = kg.add_parser(name)
        _add_common(sub)
        sub.add_argument("--triples", dest="kg_triples")
        sub.add_argument("--surface", dest="kg_surface")
        sub.set_defaults(fn=fn)

    embed = top.add_parser("embed", help="KG embedding commands").add_subparsers(
        dest="action", required=True
    )
    sub = embed.add_parser("train")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--family", choices=("transE", "transR", "transD"))
    sub.add_argument("--dim", type=int)
    sub.add_argument("--margin", type=float)
    sub.add_argument("--negatives", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--norm", choices=("L1", "L2"))
    sub.set_defaults(fn=cmd_embed_train)
    sub = embed.add_parser("eval")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--checkpoint")
    sub.set_defaults(fn=cmd_embed_eval)

    select = top.add_parser("select", help="knowledge selection commands").add_subparsers(
        dest="action", required=True
    )
    sub = select.add_parser("train")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--corpus", dest="corpus_path")
    sub.add_argument("--variant", choices=("attention", "mlp"))
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--patience", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--hidden-dim", type=int)
    sub.add_argument("--token-dim", type=int)
    sub.add_argument("--ctx-dim", type=int)
    sub.add_argument("--d-k", type=int)
    sub.add_argument("--min-count", type=int)
    sub.add_argument("--context-vectors")
    sub.add_argument("--embedding-checkpoint")
    sub.set_defaults(fn=cmd_select_train)
    sub = select.add_parser("eval")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--corpus", dest="corpus_path")
    sub.add_argument("--checkpoint")
    sub.add_argument("--embedding-checkpoint")
    sub.add_argument("--context-vectors")
    sub.add_argument("--split", choices=("train", "validation", "test"))
    sub.add_argument("--k", dest="select_ks")
    sub.set_defaults(fn=cmd_select_eval)

    gen = top.add_parser("gen", help="prompt and question generation").add_subparsers(
        dest="action", required=True
    )
    sub = gen.add_parser("prompt")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--entity", required=True)
    sub.add_argument("--relation", required=True)
    sub.add_argument("--template")
    sub.add_argument("--override", action="store_true",
                     help="build the prompt even when the edge is absent")
    sub.set_defaults(fn=cmd_gen_prompt)
    sub = gen.add_parser("realize")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--entity", required=True)
    sub.add_argument("--relation", required=True)
    sub.add_argument("--rules")
    sub.set_defaults(fn=cmd_gen_realize)
    sub = gen.add_parser("export")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--corpus", dest="corpus_path")
    sub.add_argument("--split", choices=("train", "validation", "test"))
    sub.add_argument("--template")
    sub.add_argument("--eos")
    sub.add_argument("--inference", action="store_true",
                     help="emit 3-segment sequences without the target question")
    sub.add_argument("--ids-out", help="also write the line-to-id mapping here")
    sub.set_defaults(fn=cmd_gen_export)

    score = top.add_parser("score", help="question scoring").add_subparsers(
        dest="action", required=True
    )
    sub = score.add_parser("gricean")
    _add_common(sub)
    sub.add_argument("--triples", dest="kg_triples")
    sub.add_argument("--surface", dest="kg_surface")
    sub.add_argument("--corpus", dest="corpus_path")
    sub.add_argument("--questions", required=True)
    sub.add_argument("--rel-mode", choices=gricean.REL_MODES)
    sub.add_argument("--fit-scorers", action="store_true",
                     help="train the built-in scorers before scoring")
    sub.add_argument("--scorers-dir")
    sub.add_argument("--cla-external", help="external clarity scores (JSONL)")
    sub.add_argument("--coh-external", help="external coherence scores (JSONL)")
    sub.set_defaults(fn=cmd_score_gricean)
    sub = score.add_parser("rouge")
    _add_common(sub)
    sub.add_argument("--pairs", required=True)
    sub.set_defaults(fn=cmd_score_rouge)

    stats = top.add_parser("stats", help="agreement and significance").add_subparsers(
        dest="action", required=True
    )
    sub = stats.add_parser("anova")
    _add_common(sub)
    sub.add_argument("--groups", required=True)
    sub.set_defaults(fn=cmd_stats_anova)
    sub = stats.add_parser("alpha")
    _add_common(sub)
    sub.add_argument("--ratings", required=True)
    sub.add_argument("--level", choices=metrics.ALPHA_LEVELS, default="nominal")
    sub.set_defaults(fn=cmd_stats_alpha)

    sub = top.add_parser("report", help="collect stage artifacts into one report")
    _add_common(sub)
    sub.set_defaults(fn=cmd_report)

    return parser


def _resolve_config(args) -> dict:
    config = load_config(getattr(args, "config", None))
    overrides = {
        "kg.triples": getattr(args, "kg_triples", None),
        "kg.surface": getattr(args, "kg_surface", None),
        "corpus.path": getattr(args, "corpus_path", None),
        "embed.family": getattr(args, "family", None),
        "embed.dim": getattr(args, "dim", None),
        "embed.margin": getattr(args, "margin", None),
        "embed.negatives": getattr(args, "negatives", None),
        "select.variant": getattr(args, "variant", None),
        "select.batch_size": getattr(args, "batch_size", None),
        "select.patience": getattr(args, "patience", None),
        "select.hidden_dim": getattr(args, "hidden_dim", None),
        "select.token_dim": getattr(args, "token_dim", None),
        "select.ctx_dim": getattr(args, "ctx_dim", None),
        "select.d_k": getattr(args, "d_k", None),
        "select.min_count": getattr(args, "min_count", None),
        "select.context_vectors": getattr(args, "context_vectors", None),
        "gen.eos": getattr(args, "eos", None),
        "gen.template": getattr(args, "template", None),
        "score.rel_mode": getattr(args, "rel_mode", None),
    }
    # Flags shared between sections route on the subcommand group.
    group = getattr(args, "group", None)
    if getattr(args, "epochs", None) is not None:
        overrides[f"{group}.epochs"] = args.epochs
    if getattr(args, "lr", None) is not None:
        overrides[f"{group}.lr"] = args.lr
    if getattr(args, "norm", None) is not None:
        overrides["embed.norm"] = args.norm
    if getattr(args, "split", None) is not None:
        overrides[f"{group}.split"] = args.split
    if getattr(args, "select_ks", None) is not None:
        overrides["select.ks"] = _comma_ints(args.select_ks)
    apply_overrides(config, overrides)
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    return config


def main(argv: list[str] | None = None) -> int:
    level_name = os.environ.get("FQKIT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        config = _resolve_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        args.fn(config, args, out)
        return 0
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:
        diagnostic = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(diagnostic), file=sys.stderr)
        logger.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
