import math

import numpy as np
import pytest

from fqkit.embeddings import (
    EmbedTrainConfig,
    EmbeddingTable,
    link_prediction_eval,
    margin_loss,
    train_embeddings,
)
from fqkit.kg import KnowledgeGraph, Triple
from fqkit.nn import grad_check
from fqkit.rngs import substream

SQRT2 = 1.4142135623730951


def tiny_graph():
    return KnowledgeGraph(
        [
            Triple("a", "r", "b"),
            Triple("a", "s", "x"),
            Triple("b", "r", "x"),
            Triple("b", "s", "a"),
        ]
    )


def manual_table(family, extra=None):
    params = {
        "node": np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]),
        "rel": np.array([[0.0, 1.0], [1.0, 1.0]]),
    }
    params.update(extra or {})
    return EmbeddingTable(family, 2, "L2", ("a", "b", "x"), ("r", "s"), params)


# -- score oracles ---------------------------------------------------------


def test_transe_score_hand_values():
    table = manual_table("transE")
    # h + r - t = (1,0) + (0,1) - (0,0) = (1,1)
    assert table.score("a", "r", "x") == pytest.approx(SQRT2, abs=1e-12)
    table.norm = "L1"
    assert table.score("a", "r", "x") == pytest.approx(2.0, abs=1e-12)


def test_transr_identity_matches_transe_and_projection_changes_it():
    rel_mat = np.stack([np.eye(2), np.array([[2.0, 0.0], [0.0, 1.0]])])
    table = manual_table("transR", {"rel_mat": rel_mat})
    assert table.score("a", "r", "x") == pytest.approx(SQRT2, abs=1e-12)
    # M h + r - M t = (2,0) + (1,1) - 0 = (3,1)
    assert table.score("a", "s", "x") == pytest.approx(math.sqrt(10.0), abs=1e-12)


def test_transd_projection_hand_value():
    extra = {
        "node_p": np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]),
        "rel_p": np.array([[1.0, 0.0], [0.0, 0.0]]),
    }
    table = manual_table("transD", extra)
    # projections vanish here: r_p (h_p . h) = 0 and t = t_p = 0
    assert table.score("a", "r", "x") == pytest.approx(SQRT2, abs=1e-12)
    # h=b=(0,1), h_p=(1,0), r_p=(1,0): proj h = h; score vec (0,1)+(0,1)-(0,0)
    assert table.score("b", "r", "x") == pytest.approx(2.0, abs=1e-12)


def test_margin_loss_hinge():
    assert margin_loss(1.0, 3.0, 1.0) == 0.0
    assert margin_loss(2.0, 2.5, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        margin_loss(-0.1, 1.0, 1.0)


def test_unknown_ids_raise():
    table = manual_table("transE")
    with pytest.raises(KeyError):
        table.score("ghost", "r", "x")
    with pytest.raises(KeyError):
        table.score("a", "ghost", "x")


# -- gradients -------------------------------------------------------------


@pytest.mark.parametrize("family", ["transE", "transR", "transD"])
def test_pair_loss_gradients(family):
    rng = substream(3, f"test-embed-grads-{family}")
    table = EmbeddingTable.init_random(
        family, 4, "L2", ("a", "b", "x", "y"), ("r", "s"), rng
    )
    ri = table.relation_index("r")
    pos = (table.node_index("a"), ri, table.node_index("x"))
    neg = (table.node_index("a"), ri, table.node_index("y"))

    def loss_fn():
        table.zero_grad()
        return table.pair_loss_and_grad(pos, neg, margin=10.0)

    assert grad_check(loss_fn, table.params()) < 1e-5


def test_no_gradient_when_hinge_inactive():
    table = manual_table("transE")
    table.zero_grad()
    ri = table.relation_index("r")
    ti = table.node_index("x")
    # pos dist sqrt2 < neg dist 2 with a tiny margin: hinge closed
    pos = (table.node_index("a"), ri, ti)
    neg = (table.node_index("b"), ri, ti)
    loss = table.pair_loss_and_grad(pos, neg, margin=1e-6)
    assert loss == 0.0
    assert np.allclose(table.node.grad, 0.0)
    assert np.allclose(table.rel.grad, 0.0)


# -- training --------------------------------------------------------------


def test_training_is_deterministic_and_norm_constrained():
    g = tiny_graph()
    cfg = EmbedTrainConfig(family="transE", dim=8, margin=1.0, epochs=5, lr=0.05, seed=1)
    t1, losses1 = train_embeddings(g, cfg)
    t2, losses2 = train_embeddings(g, cfg)
    assert losses1 == losses2
    assert np.array_equal(t1.node.values, t2.node.values)
    norms = np.linalg.norm(t1.node.values, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_training_clips_norms_for_transr_and_transd():
    g = tiny_graph()
    for family in ("transR", "transD"):
        cfg = EmbedTrainConfig(family=family, dim=4, margin=1.0, epochs=3, lr=0.05, seed=0)
        table, _ = train_embeddings(g, cfg)
        assert np.all(np.linalg.norm(table.node.values, axis=1) <= 1.0 + 1e-9)


def test_training_seed_changes_result():
    g = tiny_graph()
    t1, _ = train_embeddings(g, EmbedTrainConfig(dim=8, epochs=2, seed=0))
    t2, _ = train_embeddings(g, EmbedTrainConfig(dim=8, epochs=2, seed=1))
    assert not np.array_equal(t1.node.values, t2.node.values)


# -- evaluation ------------------------------------------------------------


def test_eval_ranking_is_filtered_and_tie_broken():
    # Zero vectors everywhere: all scores equal, ranking falls back to
    # ascending node id, and known-true competitors are filtered out.
    n = 3
    params = {
        "node": np.zeros((n, 2)),
        "rel": np.zeros((1, 2)),
    }
    table = EmbeddingTable("transE", 2, "L2", ("a", "b", "x"), ("r",), params)
    g = KnowledgeGraph([Triple("a", "r", "b"), Triple("a", "r", "x")])
    result = link_prediction_eval(table, g, [Triple("a", "r", "x")])
    # candidates: all nodes minus the other true tail b -> {a, x};
    # equal scores rank ascending by id, so x sits at rank 2
    assert result["n_evaluated"] == 1
    assert result["mrr"] == pytest.approx(0.5)
    assert result["hits"]["1"] == 0.0
    assert result["hits"]["3"] == 1.0


def test_eval_requires_examples():
    table = manual_table("transE")
    g = tiny_graph()
    with pytest.raises(ValueError):
        link_prediction_eval(table, g, [])


def test_eval_random_baseline_fields():
    g = tiny_graph()
    table, _ = train_embeddings(g, EmbedTrainConfig(dim=4, epochs=1, seed=0))
    result = link_prediction_eval(table, g, list(g.triples))
    rb = result["random_baseline"]
    assert 0.0 < rb["mrr"] <= 1.0
    assert set(result["hits"]) == {"1", "3", "5", "10"}
    assert set(rb["hits"]) == {"1", "3", "5", "10"}


# -- persistence -----------------------------------------------------------


@pytest.mark.parametrize("family", ["transE", "transR", "transD"])
def test_save_load_round_trip(tmp_path, family):
    rng = substream(0, f"test-save-{family}")
    table = EmbeddingTable.init_random(family, 4, "L1", ("a", "b"), ("r",), rng)
    path = tmp_path / "table.json"
    table.save(path, config={"note": "test"})
    loaded = EmbeddingTable.load(path)
    assert loaded.family == family
    assert loaded.norm == "L1"
    assert loaded.node_ids == table.node_ids
    for name, p in table.params().items():
        assert np.array_equal(p.values, loaded.params()[name].values)
    assert loaded.score("a", "r", "b") == pytest.approx(table.score("a", "r", "b"))
