"""Translation-based knowledge embeddings: TransE, TransR, TransD.

Scores are distances (lower = more plausible):

    transE   ||h + r - t||
    transR   ||M_r h + r - M_r t||
    transD   ||(r_p h_p^T + I) h + r - (r_p t_p^T + I) t||

under the table's configured norm (L1 or L2). Training minimizes the
margin-ranking loss over filtered corrupted triples with per-pair SGD,
followed by per-epoch norm constraints on the node vectors. Literal tails
are embedded alongside entities: both training corruption and link
prediction rank over every node in the graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .io import load_checkpoint, save_checkpoint
from .kg import KnowledgeGraph, Triple
from .nn import Module, Param
from .rngs import substream

logger = logging.getLogger(__name__)

FAMILIES = ("transE", "transR", "transD")
NORMS = ("L1", "L2")


@dataclass
class EmbedTrainConfig:
    family: str = "transE"
    dim: int = 400
    margin: float = 1.0
    negatives: int = 1
    epochs: int = 200
    lr: float = 0.01
    norm: str = "L2"
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family: {self.family!r}")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm: {self.norm!r}")
        if self.dim <= 0:
            raise ValueError("dimension must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.negatives <= 0 or self.epochs <= 0 or self.lr <= 0:
            raise ValueError("negatives, epochs, and lr must be positive")


def margin_loss(pos_dist: float, neg_dist: float, margin: float) -> float:
    """max(0, margin + pos_dist - neg_dist)."""
    if pos_dist < 0 or neg_dist < 0:
        raise ValueError("distances must be non-negative")
    return max(0.0, margin + pos_dist - neg_dist)


def _distance(d: np.ndarray, norm: str) -> float:
    if norm == "L1":
        return float(np.sum(np.abs(d)))
    return float(np.sqrt(np.sum(d * d)))


def _distance_grad(d: np.ndarray, norm: str) -> np.ndarray:
    if norm == "L1":
        return np.sign(d)
    dist = np.sqrt(np.sum(d * d))
    if dist < 1e-12:
        return np.zeros_like(d)
    return d / dist


class EmbeddingTable(Module):
    """Learned vectors for every node and relation of one graph."""

    def __init__(
        self,
        family: str,
        dim: int,
        norm: str,
        node_ids: tuple[str, ...],
        relation_ids: tuple[str, ...],
        params: dict[str, np.ndarray],
    ):
        if family not in FAMILIES:
            raise ValueError(f"unknown family: {family!r}")
        if norm not in NORMS:
            raise ValueError(f"unknown norm: {norm!r}")
        self.family = family
        self.dim = dim
        self.norm = norm
        self.node_ids = tuple(node_ids)
        self.relation_ids = tuple(relation_ids)
        self._node_index = {n: i for i, n in enumerate(self.node_ids)}
        self._relation_index = {r: i for i, r in enumerate(self.relation_ids)}

        required = {"node", "rel"}
        if family == "transR":
            required.add("rel_mat")
        elif family == "transD":
            required.update(("node_p", "rel_p"))
        if set(params) != required:
            raise ValueError(
                f"family {family} needs parameters {sorted(required)}, "
                f"got {sorted(params)}"
            )
        self.node = Param(params["node"])
        self.rel = Param(params["rel"])
        if family == "transR":
            self.rel_mat = Param(params["rel_mat"])
        if family == "transD":
            self.node_p = Param(params["node_p"])
            self.rel_p = Param(params["rel_p"])
        self._check_shapes()

    def _check_shapes(self) -> None:
        n, r, d = len(self.node_ids), len(self.relation_ids), self.dim
        expected = {"node": (n, d), "rel": (r, d)}
        if self.family == "transR":
            expected["rel_mat"] = (r, d, d)
        if self.family == "transD":
            expected["node_p"] = (n, d)
            expected["rel_p"] = (r, d)
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"parameter {name!r}: shape {actual}, expected {shape}")

    @classmethod
    def init_random(
        cls,
        family: str,
        dim: int,
        norm: str,
        node_ids: tuple[str, ...],
        relation_ids: tuple[str, ...],
        rng: np.random.Generator,
    ) -> "EmbeddingTable":
        n, r = len(node_ids), len(relation_ids)
        bound = 6.0 / np.sqrt(dim)
        params: dict[str, np.ndarray] = {
            "node": rng.uniform(-bound, bound, size=(n, dim)),
            "rel": rng.uniform(-bound, bound, size=(r, dim)),
        }
        if family == "transR":
            # Identity projections make the initial model score like transE.
            params["rel_mat"] = np.broadcast_to(np.eye(dim), (r, dim, dim)).copy()
        if family == "transD":
            params["node_p"] = rng.uniform(-bound, bound, size=(n, dim)) * 0.1
            params["rel_p"] = rng.uniform(-bound, bound, size=(r, dim)) * 0.1
        table = cls(family, dim, norm, node_ids, relation_ids, params)
        norms = np.linalg.norm(table.node.values, axis=1, keepdims=True)
        table.node.values /= np.maximum(norms, 1e-12)
        return table

    # -- index plumbing ----------------------------------------------------

    def node_index(self, node_id: str) -> int:
        try:
            return self._node_index[node_id]
        except KeyError:
            raise KeyError(f"unknown node: {node_id!r}") from None

    def relation_index(self, relation_id: str) -> int:
        try:
            return self._relation_index[relation_id]
        except KeyError:
            raise KeyError(f"unknown relation: {relation_id!r}") from None

    def node_vector(self, node_id: str) -> np.ndarray:
        return self.node.values[self.node_index(node_id)]

    def relation_vector(self, relation_id: str) -> np.ndarray:
        return self.rel.values[self.relation_index(relation_id)]

    # -- scoring -----------------------------------------------------------

    def score(self, head: str, relation: str, tail: str) -> float:
        return self._score_idx(
            self.node_index(head), self.relation_index(relation), self.node_index(tail)
        )

    def _difference(self, hi: int, ri: int, ti: int) -> np.ndarray:
        h = self.node.values[hi]
        t = self.node.values[ti]
        r = self.rel.values[ri]
        if self.family == "transE":
            return h + r - t
        if self.family == "transR":
            m = self.rel_mat.values[ri]
            return m @ h + r - m @ t
        rp = self.rel_p.values[ri]
        hp = self.node_p.values[hi]
        tp = self.node_p.values[ti]
        h_proj = h + rp * float(hp @ h)
        t_proj = t + rp * float(tp @ t)
        return h_proj + r - t_proj

    def _score_idx(self, hi: int, ri: int, ti: int) -> float:
        return _distance(self._difference(hi, ri, ti), self.norm)

    def score_tails_idx(self, hi: int, ri: int, tail_indices: np.ndarray) -> np.ndarray:
        """Distances of (hi, ri, t) for every t in tail_indices at once."""
        h = self.node.values[hi]
        r = self.rel.values[ri]
        tails = self.node.values[tail_indices]
        if self.family == "transE":
            diff = (h + r) - tails
        elif self.family == "transR":
            m = self.rel_mat.values[ri]
            diff = (m @ h + r) - tails @ m.T
        else:
            rp = self.rel_p.values[ri]
            hp = self.node_p.values[hi]
            tp = self.node_p.values[tail_indices]
            h_proj = h + rp * float(hp @ h)
            t_proj = tails + np.outer(np.sum(tp * tails, axis=1), rp)
            diff = (h_proj + r) - t_proj
        if self.norm == "L1":
            return np.sum(np.abs(diff), axis=1)
        return np.sqrt(np.sum(diff * diff, axis=1))

    # -- gradients ---------------------------------------------------------

    def _accumulate_grad(self, hi: int, ri: int, ti: int, dd: np.ndarray) -> None:
        """Add the gradient of distance(hi, ri, ti) scaled into dd."""
        if self.family == "transE":
            self.node.grad[hi] += dd
            self.rel.grad[ri] += dd
            self.node.grad[ti] -= dd
            return
        if self.family == "transR":
            h = self.node.values[hi]
            t = self.node.values[ti]
            m = self.rel_mat.values[ri]
            u = h - t
            self.rel_mat.grad[ri] += np.outer(dd, u)
            back = m.T @ dd
            self.node.grad[hi] += back
            self.node.grad[ti] -= back
            self.rel.grad[ri] += dd
            return
        h = self.node.values[hi]
        t = self.node.values[ti]
        rp = self.rel_p.values[ri]
        hp = self.node_p.values[hi]
        tp = self.node_p.values[ti]
        rp_dd = float(rp @ dd)
        a_h = float(hp @ h)
        a_t = float(tp @ t)
        self.node.grad[hi] += dd + hp * rp_dd
        self.node.grad[ti] += -dd - tp * rp_dd
        self.node_p.grad[hi] += h * rp_dd
        self.node_p.grad[ti] += -t * rp_dd
        self.rel_p.grad[ri] += (a_h - a_t) * dd
        self.rel.grad[ri] += dd

    def pair_loss_and_grad(
        self,
        pos: tuple[int, int, int],
        neg: tuple[int, int, int],
        margin: float,
    ) -> float:
        """Margin-ranking loss for one (positive, corrupted) pair.

        Accumulates gradients into the table's params when the hinge is
        active; returns the loss value either way.
        """
        pos_diff = self._difference(*pos)
        neg_diff = self._difference(*neg)
        pos_dist = _distance(pos_diff, self.norm)
        neg_dist = _distance(neg_diff, self.norm)
        loss = margin_loss(pos_dist, neg_dist, margin)
        if loss > 0.0:
            self._accumulate_grad(*pos, _distance_grad(pos_diff, self.norm))
            self._accumulate_grad(*neg, -_distance_grad(neg_diff, self.norm))
        return loss

    def apply_norm_constraints(self) -> None:
        """transE: renormalize node vectors to unit norm; transR/transD:
        scale down any node vector whose norm exceeds 1."""
        norms = np.linalg.norm(self.node.values, axis=1, keepdims=True)
        if self.family == "transE":
            self.node.values /= np.maximum(norms, 1e-12)
        else:
            excess = np.maximum(norms, 1.0)
            self.node.values /= excess

    # -- persistence -------------------------------------------------------

    def save(self, path, config: dict | None = None) -> None:
        params = {name: p.values for name, p in self.params().items()}
        save_checkpoint(
            path,
            kind="embedding_table",
            params=params,
            config=config or {},
            extra={
                "family": self.family,
                "dim": self.dim,
                "norm": self.norm,
                "node_ids": list(self.node_ids),
                "relation_ids": list(self.relation_ids),
            },
        )

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        payload = load_checkpoint(path, kind="embedding_table")
        extra = payload["extra"]
        return cls(
            family=extra["family"],
            dim=int(extra["dim"]),
            norm=extra["norm"],
            node_ids=tuple(extra["node_ids"]),
            relation_ids=tuple(extra["relation_ids"]),
            params=payload["params"],
        )


# -- training --------------------------------------------------------------


def train_embeddings(
    graph: KnowledgeGraph, cfg: EmbedTrainConfig
) -> tuple[EmbeddingTable, list[float]]:
    """Train a table on all graph triples; returns it with per-epoch mean
    losses. Deterministic for a fixed (graph, config)."""
    if not graph.triples:
        raise ValueError("cannot train embeddings on a graph with zero triples")
    init_rng = substream(cfg.seed, "embed-init")
    table = EmbeddingTable.init_random(
        cfg.family, cfg.dim, cfg.norm, graph.nodes, graph.relations, init_rng
    )
    train_rng = substream(cfg.seed, "embed-train")

    node_index = {n: i for i, n in enumerate(table.node_ids)}
    entity_indices = np.array([node_index[e] for e in graph.entities], dtype=np.int64)
    all_indices = np.arange(len(table.node_ids), dtype=np.int64)
    triples_idx = [
        (
            node_index[t.head],
            table.relation_index(t.relation),
            node_index[t.tail],
        )
        for t in graph.triples
    ]
    existing = set(triples_idx)

    def corrupt(pos: tuple[int, int, int]) -> tuple[int, int, int]:
        hi, ri, ti = pos
        for _ in range(1000):
            if train_rng.random() < 0.5:
                cand = (int(train_rng.choice(entity_indices)), ri, ti)
            else:
                cand = (hi, ri, int(train_rng.choice(all_indices)))
            if cand not in existing and cand != pos:
                return cand
        raise RuntimeError("could not sample a corrupted triple; graph too dense")

    history: list[float] = []
    lr = cfg.lr
    for epoch in range(cfg.epochs):
        order = train_rng.permutation(len(triples_idx))
        total = 0.0
        count = 0
        for idx in order:
            pos = triples_idx[idx]
            for _ in range(cfg.negatives):
                neg = corrupt(pos)
                loss = table.pair_loss_and_grad(pos, neg, cfg.margin)
                total += loss
                count += 1
                if loss > 0.0:
                    for p in table.params().values():
                        p.values -= lr * p.grad
                        p.zero_grad()
        table.apply_norm_constraints()
        mean_loss = total / count if count else 0.0
        if not np.isfinite(mean_loss):
            raise RuntimeError(
                f"embedding training diverged at epoch {epoch}: loss {mean_loss}"
            )
        history.append(mean_loss)
        logger.debug("epoch %d mean loss %.6f", epoch, mean_loss)
    return table, history


# -- evaluation ------------------------------------------------------------


def link_prediction_eval(
    table: EmbeddingTable,
    graph: KnowledgeGraph,
    held_out: list[Triple],
) -> dict:
    """Filtered tail ranking over every node, with id tie-breaking.

    For each held-out triple the true tail is ranked against all nodes
    except the other known-true tails of its (head, relation). Besides
    MRR and hits@{1,3,5,10}, the report carries the uniform-random
    expectations for the same filtered pools, so callers can see the
    baseline the table is beating.
    """
    if not held_out:
        raise ValueError("empty held-out set")
    ks = (1, 3, 5, 10)
    hits = {k: 0 for k in ks}
    mrr = 0.0
    base_mrr = 0.0
    base_hits = {k: 0.0 for k in ks}
    n_nodes = len(table.node_ids)
    for triple in held_out:
        hi = table.node_index(triple.head)
        ri = table.relation_index(triple.relation)
        ti = table.node_index(triple.tail)
        other_true = {
            table.node_index(t)
            for t in graph.objects(triple.head, triple.relation)
            if t != triple.tail
        }
        candidates = np.array(
            [i for i in range(n_nodes) if i not in other_true], dtype=np.int64
        )
        scores = table.score_tails_idx(hi, ri, candidates)
        ranked = sorted(
            range(len(candidates)),
            key=lambda j: (scores[j], table.node_ids[candidates[j]]),
        )
        rank = next(
            pos + 1 for pos, j in enumerate(ranked) if candidates[j] == ti
        )
        mrr += 1.0 / rank
        for k in ks:
            hits[k] += 1 if rank <= k else 0
        m = len(candidates)
        base_mrr += float(np.sum(1.0 / np.arange(1, m + 1))) / m
        for k in ks:
            base_hits[k] += min(k, m) / m
    n = len(held_out)
    return {
        "n_evaluated": n,
        "mrr": mrr / n,
        "hits": {str(k): hits[k] / n for k in ks},
        "random_baseline": {
            "mrr": base_mrr / n,
            "hits": {str(k): base_hits[k] / n for k in ks},
        },
    }
