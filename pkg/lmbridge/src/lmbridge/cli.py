"""Bridge commands: clarity, coherence, finetune.

Each command reads one toolkit-format file and writes one (finetune
writes a directory). Errors print a single JSON line to stderr: usage
problems exit 2, everything else exits 1. The LMBRIDGE_LOG environment
variable (DEBUG, INFO, ...) controls log verbosity; one JSON summary
line goes to stdout on success.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import causal, files, nsp

logger = logging.getLogger(__name__)

DEFAULT_BEAM = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def cmd_clarity(args) -> None:
    records = files.read_questions(args.infile)
    model, vocab, eos, meta = causal.load_causal(args.model)
    out_records = []
    for record in records:
        tokens = causal.tokenize(record["question"], eos)
        if not tokens:
            raise ValueError(
                f"question {record['id']!r}: tokenization yielded zero tokens"
            )
        logprobs = causal.token_logprobs(model, vocab, tokens)
        out_records.append(
            {
                "id": record["id"],
                "logprob_sum": sum(logprobs),
                "n_tokens": len(tokens),
            }
        )
    files.write_jsonl(args.outfile, {"kind": "clarity", **meta}, out_records)
    _emit({"artifact": args.outfile, "n_scored": len(out_records)})


def cmd_coherence(args) -> None:
    records = files.read_questions(args.infile)
    model = nsp.load_next_sentence(args.model)
    out_records = []
    for record in records:
        p = model.p_next(
            record["context"]["question"],
            record["context"]["answer"],
            record["question"],
        )
        out_records.append({"id": record["id"], "p_next": p})
    meta = {"kind": "coherence", "model": model.name, "tokenizer": model.tokenizer}
    files.write_jsonl(args.outfile, meta, out_records)
    _emit({"artifact": args.outfile, "n_scored": len(out_records)})


def cmd_finetune(args) -> None:
    if args.model not in causal.ARCHITECTURES:
        raise causal.ModelLoadError(
            f"model load failure: unknown causal architecture {args.model!r} "
            f"(available: {', '.join(causal.ARCHITECTURES)})"
        )
    entries = files.read_export(args.infile, args.eos)
    if args.ids:
        ids = files.read_ids(args.ids)
        if len(ids) != len(entries):
            raise ValueError(
                f"ids file lists {len(ids)} ids for {len(entries)} sequences"
            )
    else:
        ids = [f"gen-{i:04d}" for i in range(len(entries))]

    lines = [
        f"{e['question']}{args.eos}{e['answer']}{args.eos}"
        f"{e['prompt']}{args.eos}{e['followup']}{args.eos}"
        for e in entries
    ]
    cfg = causal.CausalTrainConfig(epochs=args.epochs, seed=args.seed)
    model, vocab, report = causal.train_causal_lm(lines, args.eos, cfg)

    out = Path(args.outfile)
    causal.save_causal(out / "model" / "model.json", model, vocab, args.eos, args.model)

    generated = []
    for qid, entry in zip(ids, entries):
        prefix = (
            f"{entry['question']}{args.eos}{entry['answer']}{args.eos}"
            f"{entry['prompt']}{args.eos}"
        )
        tokens = causal.beam_decode(
            model,
            vocab,
            causal.tokenize(prefix, args.eos),
            eos=args.eos,
            beam=args.beam,
            max_len=args.max_len,
        )
        generated.append(
            {
                "id": qid,
                "context": {
                    "question": entry["question"],
                    "answer": entry["answer"],
                },
                "question": " ".join(tokens),
            }
        )
    files.write_jsonl(out / "generated.jsonl", None, generated)

    summary = {
        "model": args.model,
        "beam": args.beam,
        "max_len": args.max_len,
        "seed": args.seed,
        "epochs_run": report["epochs_run"],
        "final_loss": report["train_loss"][-1],
        "n_sequences": report["n_sequences"],
        "n_generated": len(generated),
    }
    with open(out / "finetune_report.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit({"artifact": str(out / "generated.jsonl"), **summary})


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def build_parser() -> _Parser:
    parser = _Parser(prog="bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--in", dest="infile", required=True,
                       help="input file (toolkit format)")
        p.add_argument("--out", dest="outfile", required=True,
                       help="output file or directory")
        p.add_argument("--model", required=True,
                       help="model directory or builtin model name")
        p.set_defaults(fn=fn)
        return p

    add("clarity", cmd_clarity,
        "token log-probabilities per question under a causal LM")
    add("coherence", cmd_coherence,
        "next-sentence probability per (context, question) pair")
    tune = add("finetune", cmd_finetune,
               "train a generator on the fine-tune export and decode follow-ups")
    tune.add_argument("--ids", help="ids side file aligned with the export lines")
    tune.add_argument("--eos", default=causal.DEFAULT_EOS,
                      help="segment terminator used by the export")
    tune.add_argument("--beam", type=int, default=DEFAULT_BEAM,
                      help="beam size for decoding")
    tune.add_argument("--max-len", type=int, default=30, dest="max_len",
                      help="decode length cap in tokens")
    tune.add_argument("--epochs", type=int, default=30)
    tune.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    level_name = os.environ.get("LMBRIDGE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        args.fn(args)
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
