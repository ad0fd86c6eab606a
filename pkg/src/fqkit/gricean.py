"""The five reference-free follow-up-question scores.

Per generated question:

  REL    recognized entity matches the gold entity (or, in context-set
         mode, any context mention)
  INFO   out-degree centrality of the recognized entity
  TRUTH  the KG has an edge (recognized entity, predicted relation)
  CLA    perplexity of the question under an interpolated n-gram LM
  COH    a binary next-utterance judgment given the (Q, A) context

REL, INFO, and TRUTH fall back to 0 when no entity links, with the
record flagged so analyses can filter. CLA and COH come from built-in
desk-scale scorers, overridable per id by external score files produced
by any stronger stack.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter

import numpy as np

from .corpus import CorpusSplit, Example
from .encoder import ContextEncoder, Vocab
from .io import load_checkpoint, save_checkpoint
from .kg import KnowledgeGraph
from .nn import (
    AdamW,
    Dense,
    Module,
    TrainConfig,
    bce,
    softmax,
    softmax_cross_entropy,
)
from .rngs import substream
from .text import tokenize

logger = logging.getLogger(__name__)

BOUNDARY = "<s>"
UNK = "<unk>"
REL_MODES = ("gold", "context-set")


# -- n-gram language model (CLA) -------------------------------------------


class NGramLM:
    """Interpolated maximum-likelihood n-gram model.

    Counts are collected per order with boundary padding on the history
    side only: a sentence of N tokens contributes exactly N prediction
    events. Interpolation weights are renormalized per history over the
    orders whose history was actually observed, which keeps the
    conditional distribution summing to 1 for every history.
    """

    def __init__(
        self,
        order: int,
        lambdas: tuple[float, ...],
        min_count: int,
        vocab: list[str],
        counts: list[dict[tuple[str, ...], Counter]],
        history_totals: list[dict[tuple[str, ...], int]],
    ):
        self.order = order
        self.lambdas = tuple(lambdas)
        self.min_count = min_count
        self.vocab = list(vocab)
        self._vocab_set = set(vocab)
        self._counts = counts
        self._totals = history_totals

    @classmethod
    def fit(
        cls,
        sentences: list[str],
        order: int = 3,
        lambdas: tuple[float, ...] | None = None,
        min_count: int = 2,
    ) -> "NGramLM":
        if order < 1:
            raise ValueError("order must be >= 1")
        if lambdas is None:
            lambdas = tuple(1.0 / order for _ in range(order))
        if len(lambdas) != order:
            raise ValueError(f"expected {order} interpolation weights")
        if any(l < 0 for l in lambdas):
            raise ValueError("interpolation weights must be non-negative")
        if abs(sum(lambdas) - 1.0) > 1e-9:
            raise ValueError(f"interpolation weights must sum to 1, got {sum(lambdas)}")
        token_lists = [tokenize(s) for s in sentences]
        token_lists = [t for t in token_lists if t]
        if not token_lists:
            raise ValueError("no sentences with tokens to fit on")

        raw_counts = Counter()
        for toks in token_lists:
            raw_counts.update(toks)
        mapped = [
            [t if raw_counts[t] >= min_count else UNK for t in toks]
            for toks in token_lists
        ]
        vocab = sorted({t for toks in mapped for t in toks} | {UNK})

        counts: list[dict[tuple[str, ...], Counter]] = [dict() for _ in range(order)]
        totals: list[dict[tuple[str, ...], int]] = [dict() for _ in range(order)]
        for toks in mapped:
            for i, word in enumerate(toks):
                for k in range(1, order + 1):
                    history = tuple(
                        ([BOUNDARY] * (k - 1) + toks[:i])[-(k - 1) :] if k > 1 else ()
                    )
                    bucket = counts[k - 1].setdefault(history, Counter())
                    bucket[word] += 1
                    totals[k - 1][history] = totals[k - 1].get(history, 0) + 1
        return cls(order, tuple(lambdas), min_count, vocab, counts, totals)

    def _map(self, token: str) -> str:
        return token if token in self._vocab_set else UNK

    def probability(self, word: str, history: tuple[str, ...]) -> float:
        """p(word | history) with per-history weight renormalization.

        ``history`` is the most recent (order - 1) mapped tokens, boundary
        padded by the caller; longer histories are truncated.
        """
        word = self._map(word)
        history = tuple(self._map(t) if t != BOUNDARY else t for t in history)
        weight_sum = 0.0
        prob = 0.0
        for k in range(1, self.order + 1):
            h_k = history[len(history) - (k - 1) :] if k > 1 else ()
            total = self._totals[k - 1].get(h_k)
            if not total:
                continue
            weight_sum += self.lambdas[k - 1]
            prob += self.lambdas[k - 1] * self._counts[k - 1][h_k][word] / total
        if weight_sum == 0.0:
            # Unreachable after fit: the unigram history is always observed.
            return 0.0
        return prob / weight_sum

    def sentence_logprob(self, text: str) -> tuple[float, int]:
        """Natural-log probability sum and token count for one sentence."""
        toks = [self._map(t) for t in tokenize(text)]
        if not toks:
            raise ValueError("empty token sequence")
        padded = [BOUNDARY] * (self.order - 1) + toks
        total = 0.0
        for i, word in enumerate(toks):
            history = tuple(padded[i : i + self.order - 1])
            p = self.probability(word, history)
            if p <= 0.0:
                logger.warning("zero probability for token %r", word)
                return -math.inf, len(toks)
            total += math.log(p)
        return total, len(toks)

    def perplexity(self, text: str) -> float:
        logprob, n = self.sentence_logprob(text)
        return math.exp(-logprob / n)

    def normalization_error(self, histories: list[tuple[str, ...]]) -> float:
        """Max |1 - sum_w p(w|h)| over the given histories (test hook)."""
        worst = 0.0
        for history in histories:
            s = sum(self.probability(w, history) for w in self.vocab)
            worst = max(worst, abs(1.0 - s))
        return worst

    # -- persistence -------------------------------------------------------

    def save(self, path, config: dict | None = None) -> None:
        serial_counts = [
            {" ".join(h): dict(bucket) for h, bucket in level.items()}
            for level in self._counts
        ]
        extra = {
            "order": self.order,
            "lambdas": list(self.lambdas),
            "min_count": self.min_count,
            "vocab": self.vocab,
            "counts": serial_counts,
        }
        save_checkpoint(path, "ngram_lm", {}, config or {}, extra)

    @classmethod
    def load(cls, path) -> "NGramLM":
        payload = load_checkpoint(path, kind="ngram_lm")
        extra = payload["extra"]
        order = int(extra["order"])
        counts: list[dict[tuple[str, ...], Counter]] = []
        totals: list[dict[tuple[str, ...], int]] = []
        for level in extra["counts"]:
            level_counts: dict[tuple[str, ...], Counter] = {}
            level_totals: dict[tuple[str, ...], int] = {}
            for joined, bucket in level.items():
                history = tuple(joined.split(" ")) if joined else ()
                counter = Counter({w: int(c) for w, c in bucket.items()})
                level_counts[history] = counter
                level_totals[history] = sum(counter.values())
            counts.append(level_counts)
            totals.append(level_totals)
        return cls(
            order,
            tuple(extra["lambdas"]),
            int(extra["min_count"]),
            list(extra["vocab"]),
            counts,
            totals,
        )


def fit_ngram(
    sentences: list[str],
    order: int = 3,
    lambdas: tuple[float, ...] | None = None,
    min_count: int = 2,
) -> NGramLM:
    return NGramLM.fit(sentences, order, lambdas, min_count)


def score_cla(lm: NGramLM, question: str) -> float:
    """Perplexity of the question: exp(-(1/N) sum ln p)."""
    return lm.perplexity(question)


# -- relation predictor (TRUTH) --------------------------------------------


class RelationPredictor(Module):
    """Follow-up text to relation distribution over the full vocabulary."""

    def __init__(
        self,
        encoder: ContextEncoder,
        relations: tuple[str, ...],
        rng: np.random.Generator,
    ):
        self.encoder = encoder
        self.relations = tuple(relations)
        self.out = Dense(encoder.out_dim, len(self.relations), rng)

    def logits(self, question: str) -> np.ndarray:
        h = self.encoder.encode_context(question, "")
        return self.out.forward(h)

    def predict(self, question: str) -> tuple[str, np.ndarray]:
        """Argmax relation and the full distribution.

        Relations are kept sorted, so numpy's first-max argmax realizes
        the ascending-id tie-break.
        """
        probs = softmax(self.logits(question))
        return self.relations[int(np.argmax(probs))], probs

    def save(self, path, config: dict | None = None) -> None:
        params = {name: p.values for name, p in self.params().items()}
        extra = {
            "relations": list(self.relations),
            "encoder": self.encoder.config_extra(),
        }
        save_checkpoint(path, "relation_predictor", params, config or {}, extra)

    @classmethod
    def load(cls, path) -> "RelationPredictor":
        payload = load_checkpoint(path, kind="relation_predictor")
        extra = payload["extra"]
        encoder = ContextEncoder.from_extra(extra["encoder"], payload["params"], "encoder.")
        model = cls(encoder, tuple(extra["relations"]), np.random.default_rng(0))
        for name, p in model.params().items():
            if name.startswith("encoder."):
                continue
            p.values[...] = payload["params"][name]
        return model


def train_relation_predictor(
    split: CorpusSplit,
    relations: tuple[str, ...],
    cfg: TrainConfig,
) -> tuple[RelationPredictor, dict]:
    """Cross-entropy training of follow-up text to gold relation."""
    relations = tuple(sorted(relations))
    rel_index = {r: i for i, r in enumerate(relations)}
    train_pairs = [
        (ex.followup, rel_index[ex.gold_relation])
        for ex in split.train
        if ex.followup is not None and ex.gold_relation in rel_index
    ]
    val_pairs = [
        (ex.followup, rel_index[ex.gold_relation])
        for ex in split.validation
        if ex.followup is not None and ex.gold_relation in rel_index
    ]
    if not train_pairs:
        raise ValueError("no training examples with follow-ups")
    train_rels = {r for _, r in train_pairs}
    for _, r in val_pairs:
        if r not in train_rels:
            logger.warning(
                "relation %r appears in validation but never in training",
                relations[r],
            )

    init_rng = substream(cfg.seed, "relpred-init")
    vocab = Vocab.build([tokenize(t) for t, _ in train_pairs], cfg.min_count)
    encoder = ContextEncoder(vocab, cfg.token_dim, cfg.ctx_dim, init_rng)
    model = RelationPredictor(encoder, relations, init_rng)
    opt = AdamW(model.params(), lr=cfg.lr)
    shuffle_rng = substream(cfg.seed, "relpred-shuffle")

    def accuracy(pairs) -> float:
        if not pairs:
            return 0.0
        good = sum(
            1 for text, gold in pairs if model.predict(text)[0] == relations[gold]
        )
        return good / len(pairs)

    best_metric = -1.0
    best_epoch = -1
    best_snapshot = None
    since_best = 0
    loss_history: list[float] = []
    val_history: list[float] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train_pairs))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            scale = 1.0 / len(batch)
            for idx in batch:
                text, gold = train_pairs[idx]
                h = model.encoder.encode_context(text, "")
                z = model.out.forward(h)
                loss, _, dz = softmax_cross_entropy(z, gold)
                epoch_loss += loss
                dh = model.out.backward(dz * scale)
                model.encoder.backward(dh)
            opt.step()
        loss_history.append(epoch_loss / len(train_pairs))
        if val_pairs:
            metric = accuracy(val_pairs)
            val_history.append(metric)
            if metric > best_metric:
                best_metric, best_epoch, since_best = metric, epoch, 0
                best_snapshot = {
                    name: p.values.copy() for name, p in model.params().items()
                }
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break
    if best_snapshot is not None:
        for name, p in model.params().items():
            p.values[...] = best_snapshot[name]
    report = {
        "epochs_run": len(loss_history),
        "best_epoch": best_epoch,
        "train_loss": loss_history,
        "val_accuracy": val_history,
        "n_train": len(train_pairs),
    }
    return model, report


# -- coherence classifier (COH) --------------------------------------------


class CoherenceClassifier(Module):
    """Binary next-utterance classifier over context <sep> candidate.

    The head is a relu hidden layer into a sigmoid unit. The hidden
    layer matters: whether a candidate continues its context is an
    agreement feature between the two halves of the pooled bag, which no
    purely linear readout of mean-pooled embeddings can express.
    """

    def __init__(self, encoder: ContextEncoder, hidden_dim: int, rng: np.random.Generator):
        self.encoder = encoder
        self.hidden = Dense(encoder.out_dim, hidden_dim, rng, activation="relu")
        self.out = Dense(hidden_dim, 1, rng, activation="sigmoid")

    def p_next(self, context_question: str, context_answer: str, question: str) -> float:
        context_toks = tokenize(context_question) + tokenize(context_answer)
        h = self.encoder.encode_pair(context_toks, tokenize(question))
        return float(self.out.forward(self.hidden.forward(h))[0])

    def save(self, path, config: dict | None = None) -> None:
        params = {name: p.values for name, p in self.params().items()}
        extra = {
            "hidden_dim": self.hidden.bias.values.shape[0],
            "encoder": self.encoder.config_extra(),
        }
        save_checkpoint(path, "coherence_classifier", params, config or {}, extra)

    @classmethod
    def load(cls, path) -> "CoherenceClassifier":
        payload = load_checkpoint(path, kind="coherence_classifier")
        extra = payload["extra"]
        encoder = ContextEncoder.from_extra(extra["encoder"], payload["params"], "encoder.")
        model = cls(encoder, int(extra["hidden_dim"]), np.random.default_rng(0))
        for name, p in model.params().items():
            if name.startswith("encoder."):
                continue
            p.values[...] = payload["params"][name]
        return model


def score_coh(
    clf: CoherenceClassifier,
    context: tuple[str, str],
    question: str,
) -> tuple[int, float]:
    """Binary coherence and the raw probability; p = 0.5 maps to 1."""
    p = clf.p_next(context[0], context[1], question)
    return (1 if p >= 0.5 else 0), p


def train_coherence(
    split: CorpusSplit,
    cfg: TrainConfig,
    negative_ratio: int = 1,
) -> tuple[CoherenceClassifier, dict]:
    """BCE training on gold (context, follow-up) pairs vs follow-ups
    drawn from other examples."""
    train_ex = [ex for ex in split.train if ex.followup is not None]
    if len(train_ex) < 2:
        raise ValueError("need at least 2 examples with follow-ups to sample negatives")
    val_ex = [ex for ex in split.validation if ex.followup is not None]

    neg_rng = substream(cfg.seed, "coherence-negatives")

    def build_pairs(examples, rng) -> list[tuple[Example, str, float]]:
        pairs = []
        for i, ex in enumerate(examples):
            pairs.append((ex, ex.followup, 1.0))
            for _ in range(negative_ratio):
                j = i
                while j == i:
                    j = int(rng.integers(len(examples)))
                pairs.append((ex, examples[j].followup, 0.0))
        return pairs

    val_pairs = (
        build_pairs(val_ex, substream(cfg.seed, "coherence-val-negatives"))
        if len(val_ex) >= 2
        else []
    )

    init_rng = substream(cfg.seed, "coherence-init")
    token_lists = [
        tokenize(ex.question) + tokenize(ex.answer) + tokenize(ex.followup)
        for ex in train_ex
    ]
    vocab = Vocab.build(token_lists, cfg.min_count)
    encoder = ContextEncoder(vocab, cfg.token_dim, cfg.ctx_dim, init_rng)
    model = CoherenceClassifier(encoder, cfg.hidden_dim, init_rng)
    opt = AdamW(model.params(), lr=cfg.lr)
    shuffle_rng = substream(cfg.seed, "coherence-shuffle")

    def pair_loss(ex: Example, candidate: str, label: float, scale: float, train: bool) -> float:
        context_toks = tokenize(ex.question) + tokenize(ex.answer)
        h = model.encoder.encode_pair(context_toks, tokenize(candidate))
        p = model.out.forward(model.hidden.forward(h))
        loss, dp = bce(p, np.array([label]))
        if train:
            dh = model.hidden.backward(model.out.backward(dp * scale))
            model.encoder.backward(dh)
        return loss

    best_metric = math.inf
    best_epoch = -1
    best_snapshot = None
    since_best = 0
    loss_history: list[float] = []
    val_history: list[float] = []
    for epoch in range(cfg.epochs):
        pairs = build_pairs(train_ex, neg_rng)
        order = shuffle_rng.permutation(len(pairs))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            scale = 1.0 / len(batch)
            for idx in batch:
                ex, cand, label = pairs[idx]
                epoch_loss += pair_loss(ex, cand, label, scale, train=True)
            opt.step()
        loss_history.append(epoch_loss / len(pairs))
        if val_pairs:
            val_loss = sum(
                pair_loss(ex, cand, label, 0.0, train=False)
                for ex, cand, label in val_pairs
            ) / len(val_pairs)
            val_history.append(val_loss)
            if val_loss < best_metric:
                best_metric, best_epoch, since_best = val_loss, epoch, 0
                best_snapshot = {
                    name: p.values.copy() for name, p in model.params().items()
                }
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break
    if best_snapshot is not None:
        for name, p in model.params().items():
            p.values[...] = best_snapshot[name]
    report = {
        "epochs_run": len(loss_history),
        "best_epoch": best_epoch,
        "train_loss": loss_history,
        "val_loss": val_history,
        "n_train_pairs": (1 + negative_ratio) * len(train_ex),
    }
    return model, report


# -- entity-grounded scores ------------------------------------------------


def score_rel(
    graph: KnowledgeGraph,
    question: str,
    gold_entity: str | None,
    context_mentions: list[str],
    mode: str = "gold",
) -> tuple[int, str | None]:
    """Relevance bit plus the recognized entity (None when nothing links)."""
    if mode not in REL_MODES:
        raise ValueError(f"unknown REL mode: {mode!r}")
    mention = graph.link_entity(question)
    if mention is None:
        return 0, None
    recognized = mention.entity_id
    if mode == "gold":
        return (1 if recognized == gold_entity else 0), recognized
    return (1 if recognized in context_mentions else 0), recognized


def score_info(graph: KnowledgeGraph, question: str) -> tuple[float, str | None]:
    """Centrality of the recognized entity; 0 when nothing links."""
    mention = graph.link_entity(question)
    if mention is None:
        return 0.0, None
    return graph.centrality(mention.entity_id), mention.entity_id


def score_truth(
    graph: KnowledgeGraph,
    question: str,
    predictor: RelationPredictor,
) -> tuple[int, str | None, str]:
    """Truthfulness bit, recognized entity, and predicted relation."""
    predicted, _ = predictor.predict(question)
    mention = graph.link_entity(question)
    if mention is None:
        return 0, None, predicted
    truth = 1 if graph.has_edge(mention.entity_id, predicted) else 0
    return truth, mention.entity_id, predicted


# -- external score files --------------------------------------------------


def _read_score_file(path, required: tuple[str, ...]) -> list[dict]:
    records: list[dict] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            if "_meta" in record:
                logger.debug("score file %s: meta %s", path, record["_meta"])
                continue
            for name in required:
                if name not in record:
                    raise ValueError(f"{path}:{lineno}: missing field {name!r}")
            if record["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {record['id']!r}")
            seen.add(record["id"])
            records.append(record)
    return records


def read_clarity_file(path) -> dict[str, float]:
    """External clarity scores: CLA = exp(-logprob_sum / n_tokens)."""
    out: dict[str, float] = {}
    for record in _read_score_file(path, ("id", "logprob_sum", "n_tokens")):
        logprob_sum = float(record["logprob_sum"])
        n_tokens = int(record["n_tokens"])
        if n_tokens < 1:
            raise ValueError(f"clarity record {record['id']!r}: n_tokens < 1")
        if not math.isfinite(logprob_sum):
            raise ValueError(f"clarity record {record['id']!r}: non-finite logprob_sum")
        out[record["id"]] = math.exp(-logprob_sum / n_tokens)
    return out


def read_coherence_file(path) -> dict[str, float]:
    """External coherence probabilities: COH = [p_next >= 0.5]."""
    out: dict[str, float] = {}
    for record in _read_score_file(path, ("id", "p_next")):
        p = float(record["p_next"])
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"coherence record {record['id']!r}: p_next outside [0,1]")
        out[record["id"]] = p
    return out


def read_questions_file(path) -> list[dict]:
    """Questions to score: JSONL {id, context: {question, answer}, question}."""
    records: list[dict] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            if (
                not isinstance(record.get("id"), str)
                or not isinstance(record.get("question"), str)
                or not isinstance(record.get("context"), dict)
                or not isinstance(record["context"].get("question"), str)
                or not isinstance(record["context"].get("answer"), str)
            ):
                raise ValueError(
                    f"{path}:{lineno}: expected {{id, context: {{question, answer}}, question}}"
                )
            if record["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {record['id']!r}")
            seen.add(record["id"])
            records.append(record)
    if not records:
        raise ValueError(f"{path}: no questions to score")
    return records


# -- full report -----------------------------------------------------------


def score_all(
    graph: KnowledgeGraph,
    questions: list[dict],
    examples_by_id: dict[str, Example],
    predictor: RelationPredictor,
    lm: NGramLM | None = None,
    coherence: CoherenceClassifier | None = None,
    rel_mode: str = "gold",
    external_cla: dict[str, float] | None = None,
    external_coh: dict[str, float] | None = None,
) -> dict:
    """Score every question and aggregate.

    The questions' ids must refer to corpus examples, which supply the
    gold entity and context mention set for REL. CLA and COH need either
    their built-in model or full external coverage; per-id external
    values override the built-ins where both exist.
    """
    if not questions:
        raise ValueError("empty question set")
    if rel_mode not in REL_MODES:
        raise ValueError(f"unknown REL mode: {rel_mode!r}")
    records = []
    for q in sorted(questions, key=lambda r: r["id"]):
        qid = q["id"]
        example = examples_by_id.get(qid)
        if example is None:
            raise ValueError(f"question id {qid!r} not found in the corpus")
        text = q["question"]
        rel, recognized = score_rel(
            graph, text, example.gold_entity, example.mentions, rel_mode
        )
        info, _ = score_info(graph, text)
        truth, _, predicted = score_truth(graph, text, predictor)

        if external_cla is not None and qid in external_cla:
            cla = external_cla[qid]
        elif lm is not None:
            cla = score_cla(lm, text)
        else:
            raise ValueError(
                f"no clarity model and no external clarity score for id {qid!r}"
            )

        context = (q["context"]["question"], q["context"]["answer"])
        if external_coh is not None and qid in external_coh:
            coh_p = external_coh[qid]
            coh = 1 if coh_p >= 0.5 else 0
        elif coherence is not None:
            coh, coh_p = score_coh(coherence, context, text)
        else:
            raise ValueError(
                f"no coherence model and no external coherence score for id {qid!r}"
            )

        records.append(
            {
                "id": qid,
                "rel": rel,
                "info": info,
                "truth": truth,
                "cla": cla,
                "coh": coh,
                "coh_p": coh_p,
                "recognized_entity": recognized,
                "predicted_relation": predicted,
                "unrecognized": recognized is None,
            }
        )
    n = len(records)
    aggregates = {
        "rel_pct": 100.0 * sum(r["rel"] for r in records) / n,
        "info_mean": sum(r["info"] for r in records) / n,
        "truth_pct": 100.0 * sum(r["truth"] for r in records) / n,
        "cla_mean": sum(r["cla"] for r in records) / n,
        "coh_pct": 100.0 * sum(r["coh"] for r in records) / n,
    }
    return {"n_questions": n, "records": records, "aggregates": aggregates}


# -- scorer bundle ---------------------------------------------------------


def fit_scorers(
    split: CorpusSplit,
    graph: KnowledgeGraph,
    cfg: TrainConfig,
    lm_order: int = 3,
    lm_lambdas: tuple[float, ...] | None = None,
    lm_min_count: int = 2,
) -> tuple[RelationPredictor, NGramLM, CoherenceClassifier, dict]:
    """Train all three built-in scorers from a corpus split."""
    predictor, pred_report = train_relation_predictor(split, graph.relations, cfg)
    sentences = [ex.followup for ex in split.train if ex.followup is not None]
    lm = fit_ngram(sentences, lm_order, lm_lambdas, lm_min_count)
    coherence, coh_report = train_coherence(split, cfg)
    report = {"relation_predictor": pred_report, "coherence": coh_report}
    return predictor, lm, coherence, report
