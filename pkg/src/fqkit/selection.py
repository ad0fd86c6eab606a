"""Knowledge selection: score candidate entities and relations for a
dialogue history.

Two head variants over a shared context encoder:

  attention  s = softmax(q K^T / sqrt(d_k)), q = W_Q h_qa, K rows = W_K h_e
  mlp        s_j = sigmoid(MLP([h_qa; h_e_j])) per candidate

Entity and relation heads are parallel structures with separate
parameters. Training minimizes the summed binary cross-entropy of both
heads (per-example candidate sums, averaged over the batch) with AdamW,
keeping the knowledge embeddings frozen, and early-stops on validation
recall@1.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusSplit, Example
from .embeddings import EmbeddingTable
from .encoder import ContextEncoder, Vocab
from .io import load_checkpoint, save_checkpoint
from .kg import KnowledgeGraph
from .nn import (
    DTYPE,
    AdamW,
    Dense,
    Module,
    Param,
    ScaledDotAttention,
    bce,
    glorot_uniform,
)
from .rngs import substream
from .text import tokenize

logger = logging.getLogger(__name__)

VARIANTS = ("attention", "mlp")


def candidate_relations(graph: KnowledgeGraph, mentions: list[str]) -> list[str]:
    """Deduplicated, id-sorted union of outgoing relations over mentions."""
    if not mentions:
        raise ValueError("empty mention list")
    out: set[str] = set()
    for m in mentions:
        out.update(graph.relations_of(m))
    return sorted(out)


def rank_candidates(ids: list[str], scores: np.ndarray) -> list[tuple[str, float]]:
    """Candidates by descending score; ties broken by ascending id."""
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
    return [(ids[j], float(scores[j])) for j in order]


class AttentionHead(Module):
    def __init__(self, d_k: int, d_ctx: int, d_emb: int, rng: np.random.Generator):
        self.wq = Param(glorot_uniform(rng, (d_k, d_ctx)))
        self.wk = Param(glorot_uniform(rng, (d_k, d_emb)))
        self._attn = ScaledDotAttention()
        self._h: np.ndarray | None = None
        self._emb: np.ndarray | None = None

    def forward(self, h_qa: np.ndarray, emb: np.ndarray) -> np.ndarray:
        q = self.wq.values @ h_qa
        keys = emb @ self.wk.values.T
        self._h, self._emb = h_qa, emb
        return self._attn.forward(q, keys)

    def backward(self, dscores: np.ndarray) -> np.ndarray:
        dq, dkeys = self._attn.backward(dscores)
        self.wq.grad += np.outer(dq, self._h)
        self.wk.grad += dkeys.T @ self._emb
        return self.wq.values.T @ dq


class MlpHead(Module):
    def __init__(self, d_ctx: int, d_emb: int, hidden_dim: int, rng: np.random.Generator):
        self.d_ctx = d_ctx
        self.hidden = Dense(d_ctx + d_emb, hidden_dim, rng, activation="relu")
        self.out = Dense(hidden_dim, 1, rng, activation="sigmoid")

    def forward(self, h_qa: np.ndarray, emb: np.ndarray) -> np.ndarray:
        x = np.concatenate(
            [np.broadcast_to(h_qa, (emb.shape[0], h_qa.shape[0])), emb], axis=1
        )
        return self.out.forward(self.hidden.forward(x)).reshape(-1)

    def backward(self, dscores: np.ndarray) -> np.ndarray:
        dx = self.hidden.backward(self.out.backward(dscores.reshape(-1, 1)))
        return dx[:, : self.d_ctx].sum(axis=0)


class SelectorModel(Module):
    """Entity and relation scoring heads over a shared context encoder."""

    def __init__(
        self,
        variant: str,
        encoder: ContextEncoder,
        d_emb: int,
        d_k: int,
        hidden_dim: int,
        rng: np.random.Generator,
        external_context: bool = False,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant: {variant!r}")
        self.variant = variant
        self.encoder = encoder
        self.d_emb = d_emb
        self.d_k = d_k
        self.hidden_dim = hidden_dim
        self.external_context = external_context
        d_ctx = encoder.out_dim
        if variant == "attention":
            self.ent_head = AttentionHead(d_k, d_ctx, d_emb, rng)
            self.rel_head = AttentionHead(d_k, d_ctx, d_emb, rng)
        else:
            self.ent_head = MlpHead(d_ctx, d_emb, hidden_dim, rng)
            self.rel_head = MlpHead(d_ctx, d_emb, hidden_dim, rng)

    # -- scoring -----------------------------------------------------------

    def score_entities(self, h_qa: np.ndarray, emb: np.ndarray) -> np.ndarray:
        if emb.shape[0] == 0:
            raise ValueError("zero candidates")
        return self.ent_head.forward(h_qa, emb)

    def score_relations(self, h_qa: np.ndarray, emb: np.ndarray) -> np.ndarray:
        if emb.shape[0] == 0:
            raise ValueError("zero candidates")
        return self.rel_head.forward(h_qa, emb)

    # -- persistence -------------------------------------------------------

    def save(self, path, config: dict | None = None) -> None:
        params = {name: p.values for name, p in self.params().items()}
        extra = {
            "variant": self.variant,
            "d_emb": self.d_emb,
            "d_k": self.d_k,
            "hidden_dim": self.hidden_dim,
            "external_context": self.external_context,
            "encoder": self.encoder.config_extra(),
        }
        save_checkpoint(path, "selector", params, config or {}, extra)

    @classmethod
    def load(cls, path) -> "SelectorModel":
        payload = load_checkpoint(path, kind="selector")
        extra = payload["extra"]
        params = payload["params"]
        encoder = ContextEncoder.from_extra(extra["encoder"], params, "encoder.")
        rng = np.random.default_rng(0)
        model = cls(
            variant=extra["variant"],
            encoder=encoder,
            d_emb=int(extra["d_emb"]),
            d_k=int(extra["d_k"]),
            hidden_dim=int(extra["hidden_dim"]),
            rng=rng,
            external_context=bool(extra.get("external_context", False)),
        )
        for name, p in model.params().items():
            if name.startswith("encoder."):
                continue
            stored = params[name]
            if stored.shape != p.values.shape:
                raise ValueError(
                    f"parameter {name!r}: shape {stored.shape}, expected {p.values.shape}"
                )
            p.values[...] = stored
        return model


# -- context vector side channel -------------------------------------------


def read_context_vectors(path) -> dict[str, np.ndarray]:
    """JSONL {id, vector} from any external encoder."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            vec = np.asarray(record["vector"], dtype=DTYPE)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError(
                    f"{path}:{lineno}: vector length {vec.size} != {dim}"
                )
            vectors[record["id"]] = vec
    if not vectors:
        raise ValueError(f"{path}: no context vectors")
    return vectors


# -- training --------------------------------------------------------------


@dataclass
class _Prepared:
    example: Example
    ent_candidates: list[str]
    rel_candidates: list[str]
    ent_gold: int
    rel_gold: int


def _prepare_examples(
    examples: list[Example],
    graph: KnowledgeGraph,
    table: EmbeddingTable,
) -> tuple[list[_Prepared], list[dict]]:
    prepared: list[_Prepared] = []
    dropped: list[dict] = []
    known_nodes = set(table.node_ids)
    known_rels = set(table.relation_ids)
    for ex in examples:
        mentions = sorted(set(ex.mentions))
        missing = [m for m in mentions if m not in known_nodes]
        if ex.gold_entity not in known_nodes or missing:
            dropped.append({"id": ex.id, "reason": "mention without embedding"})
            continue
        rels = candidate_relations(graph, mentions)
        rels = [r for r in rels if r in known_rels]
        if ex.gold_relation not in rels:
            dropped.append({"id": ex.id, "reason": "gold relation not a candidate"})
            continue
        prepared.append(
            _Prepared(
                example=ex,
                ent_candidates=mentions,
                rel_candidates=rels,
                ent_gold=mentions.index(ex.gold_entity),
                rel_gold=rels.index(ex.gold_relation),
            )
        )
    return prepared, dropped


def _context_vector(
    model: SelectorModel,
    ex: Example,
    context_vectors: dict[str, np.ndarray] | None,
) -> np.ndarray:
    if model.external_context:
        if context_vectors is None or ex.id not in context_vectors:
            raise ValueError(f"no context vector for example {ex.id!r}")
        return context_vectors[ex.id]
    return model.encoder.encode_context(ex.question, ex.answer)


def _example_loss(
    model: SelectorModel,
    table: EmbeddingTable,
    item: _Prepared,
    scale: float,
    context_vectors: dict[str, np.ndarray] | None,
    train: bool,
) -> float:
    """Summed per-candidate BCE of both heads for one example; backprops
    (scaled) into the model when train is set."""
    ex = item.example
    h_qa = _context_vector(model, ex, context_vectors)
    ent_emb = np.stack([table.node_vector(e) for e in item.ent_candidates])
    rel_emb = np.stack([table.relation_vector(r) for r in item.rel_candidates])

    ent_scores = model.score_entities(h_qa, ent_emb)
    ent_y = np.zeros(len(item.ent_candidates), dtype=DTYPE)
    ent_y[item.ent_gold] = 1.0
    ent_loss, ent_dp = bce(ent_scores, ent_y)

    rel_scores = model.score_relations(h_qa, rel_emb)
    rel_y = np.zeros(len(item.rel_candidates), dtype=DTYPE)
    rel_y[item.rel_gold] = 1.0
    rel_loss, rel_dp = bce(rel_scores, rel_y)

    if train:
        dh = model.rel_head.backward(rel_dp * scale)
        dh = dh + model.ent_head.backward(ent_dp * scale)
        if not model.external_context:
            model.encoder.backward(dh)
    return ent_loss + rel_loss


def train_selector(
    split: CorpusSplit,
    graph: KnowledgeGraph,
    table: EmbeddingTable,
    cfg,
    variant: str,
    context_vectors: dict[str, np.ndarray] | None = None,
) -> tuple[SelectorModel, dict]:
    """Train one variant with frozen embeddings. Returns the best model
    (by validation recall@1 when a validation split exists) and a report."""
    if not split.train:
        raise ValueError("empty training split")
    external = context_vectors is not None
    init_rng = substream(cfg.seed, f"select-init-{variant}")

    token_lists = [
        tokenize(ex.question) + tokenize(ex.answer) for ex in split.train
    ]
    vocab = Vocab.build(token_lists, min_count=cfg.min_count)
    if external:
        d_ctx = next(iter(context_vectors.values())).size
    else:
        d_ctx = cfg.ctx_dim
    encoder = ContextEncoder(vocab, cfg.token_dim, d_ctx, init_rng)
    model = SelectorModel(
        variant,
        encoder,
        d_emb=table.dim,
        d_k=cfg.d_k,
        hidden_dim=cfg.hidden_dim,
        rng=init_rng,
        external_context=external,
    )

    train_items, dropped = _prepare_examples(split.train, graph, table)
    val_items, val_dropped = _prepare_examples(split.validation, graph, table)
    for d in dropped + val_dropped:
        logger.warning("selection: dropping %s (%s)", d["id"], d["reason"])
    if not train_items:
        raise ValueError("no trainable examples after embedding checks")

    opt = AdamW(model.params(), lr=cfg.lr)
    shuffle_rng = substream(cfg.seed, f"select-shuffle-{variant}")

    best_snapshot: dict[str, np.ndarray] | None = None
    best_metric = -1.0
    best_epoch = -1
    since_best = 0
    loss_history: list[float] = []
    val_history: list[float] = []

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train_items))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            scale = 1.0 / len(batch)
            for idx in batch:
                epoch_loss += _example_loss(
                    model, table, train_items[idx], scale, context_vectors, train=True
                )
            opt.step()
        loss_history.append(epoch_loss / len(train_items))

        if val_items:
            metric = 0.5 * (
                _recall_prepared(model, table, val_items, 1, "entity", context_vectors)
                + _recall_prepared(model, table, val_items, 1, "relation", context_vectors)
            )
            val_history.append(metric)
            if metric > best_metric:
                best_metric = metric
                best_epoch = epoch
                best_snapshot = {
                    name: p.values.copy() for name, p in model.params().items()
                }
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    logger.debug("early stop at epoch %d", epoch)
                    break

    if best_snapshot is not None:
        for name, p in model.params().items():
            p.values[...] = best_snapshot[name]
    report = {
        "variant": variant,
        "epochs_run": len(loss_history),
        "best_epoch": best_epoch,
        "train_loss": loss_history,
        "val_recall1": val_history,
        "n_train": len(train_items),
        "n_dropped": len(dropped) + len(val_dropped),
    }
    return model, report


# -- evaluation ------------------------------------------------------------


def _recall_prepared(
    model: SelectorModel,
    table: EmbeddingTable,
    items: list[_Prepared],
    k: int,
    target: str,
    context_vectors: dict[str, np.ndarray] | None,
) -> float:
    hits = 0
    for item in items:
        h_qa = _context_vector(model, item.example, context_vectors)
        if target == "entity":
            ids = item.ent_candidates
            emb = np.stack([table.node_vector(e) for e in ids])
            scores = model.score_entities(h_qa, emb)
            gold = item.example.gold_entity
        else:
            ids = item.rel_candidates
            emb = np.stack([table.relation_vector(r) for r in ids])
            scores = model.score_relations(h_qa, emb)
            gold = item.example.gold_relation
        top = [cid for cid, _ in rank_candidates(ids, scores)[:k]]
        hits += 1 if gold in top else 0
    return hits / len(items) if items else 0.0


def recall_at_k(
    model: SelectorModel,
    examples: list[Example],
    graph: KnowledgeGraph,
    table: EmbeddingTable,
    k: int,
    target: str = "entity",
    context_vectors: dict[str, np.ndarray] | None = None,
) -> float:
    """Fraction of examples whose gold item is in the top-k candidates."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if target not in ("entity", "relation"):
        raise ValueError(f"unknown target: {target!r}")
    items, dropped = _prepare_examples(examples, graph, table)
    for d in dropped:
        logger.warning("selection eval: skipping %s (%s)", d["id"], d["reason"])
    if not items:
        raise ValueError("no evaluable examples")
    return _recall_prepared(model, table, items, k, target, context_vectors)


def evaluate(
    model: SelectorModel,
    examples: list[Example],
    graph: KnowledgeGraph,
    table: EmbeddingTable,
    ks: tuple[int, ...] = (1, 3, 5),
    context_vectors: dict[str, np.ndarray] | None = None,
) -> dict:
    """Recall table for one model: entity and relation recall at each k."""
    items, dropped = _prepare_examples(examples, graph, table)
    if not items:
        raise ValueError("no evaluable examples")
    report: dict = {
        "variant": model.variant,
        "n_evaluated": len(items),
        "n_skipped": len(dropped),
        "entity": {},
        "relation": {},
    }
    for k in ks:
        report["entity"][f"recall@{k}"] = _recall_prepared(
            model, table, items, k, "entity", context_vectors
        )
        report["relation"][f"recall@{k}"] = _recall_prepared(
            model, table, items, k, "relation", context_vectors
        )
    return report
