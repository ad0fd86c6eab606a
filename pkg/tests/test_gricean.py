"""Score tests: the n-gram LM, the two trained scorers, and score_all."""

import json
import logging
import math
from collections import Counter

import numpy as np
import pytest

from fqkit.corpus import CorpusSplit, Example
from fqkit.encoder import ContextEncoder, Vocab
from fqkit.gricean import (
    BOUNDARY,
    CoherenceClassifier,
    NGramLM,
    RelationPredictor,
    fit_ngram,
    fit_scorers,
    read_clarity_file,
    read_coherence_file,
    read_questions_file,
    score_all,
    score_cla,
    score_coh,
    score_info,
    score_rel,
    score_truth,
    train_coherence,
    train_relation_predictor,
)
from fqkit.nn import TrainConfig
from fqkit.rngs import substream

LN2 = 0.6931471805599453


# -- n-gram LM -------------------------------------------------------------


def test_unigram_hand_probabilities():
    lm = fit_ngram(["a b", "a c"], order=1, min_count=1)
    assert lm.probability("a", ()) == pytest.approx(0.5, abs=1e-12)
    assert lm.probability("b", ()) == pytest.approx(0.25, abs=1e-12)
    logprob, n = lm.sentence_logprob("a b")
    assert n == 2
    assert logprob == pytest.approx(math.log(0.5) + math.log(0.25), abs=1e-12)
    assert lm.perplexity("a b") == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-9)


def test_bigram_interpolation_with_history_renormalization():
    lm = fit_ngram(["a b a c"], order=2, lambdas=(0.5, 0.5), min_count=1)
    # both orders observed for history (a,)
    assert lm.probability("b", ("a",)) == pytest.approx(0.375, abs=1e-12)
    # history (c,) never continues, so the weight renormalizes onto unigram
    assert lm.probability("b", ("c",)) == pytest.approx(0.25, abs=1e-12)
    assert lm.probability("a", (BOUNDARY,)) == pytest.approx(0.75, abs=1e-12)
    logprob, n = lm.sentence_logprob("a b a c")
    assert n == 4
    assert logprob == pytest.approx(
        2.0 * (math.log(0.75) + math.log(0.375)), abs=1e-12
    )


def test_conditionals_sum_to_one_for_every_history():
    lm = fit_ngram(
        ["when was it released", "who released it", "when was that"],
        order=3,
        min_count=1,
    )
    histories = [
        (BOUNDARY, BOUNDARY),
        (BOUNDARY, "when"),
        ("when", "was"),
        ("released", "it"),  # unseen trigram history
        ("zzz", "zzz"),      # fully unseen
    ]
    assert lm.normalization_error(histories) <= 1e-9


def test_sentence_contributes_one_event_per_token():
    lm = fit_ngram(["x y"], order=3, min_count=1)
    assert sum(lm._totals[0].values()) == 2
    _, n = lm.sentence_logprob("x y")
    assert n == 2


def test_min_count_maps_rare_tokens_to_unk():
    lm = fit_ngram(["common common rare"], order=1, min_count=2)
    assert lm.vocab == ["<unk>", "common"]
    assert lm.probability("rare", ()) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert lm.probability("never_seen", ()) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_unseeable_token_gives_minus_inf_and_warns(caplog):
    lm = fit_ngram(["a b"], order=1, min_count=1)
    with caplog.at_level(logging.WARNING, logger="fqkit.gricean"):
        logprob, n = lm.sentence_logprob("a z")
    assert logprob == -math.inf and n == 2
    assert any("zero probability" in r.message for r in caplog.records)
    assert lm.perplexity("a z") == math.inf


def test_uniform_unigram_perplexity_is_vocabulary_size():
    vocab = ["<unk>", "blue", "green", "red"]
    counts = {(): Counter({w: 1 for w in vocab})}
    totals = {(): len(vocab)}
    lm = NGramLM(1, (1.0,), 1, vocab, [counts], [totals])
    assert lm.perplexity("red blue green") == pytest.approx(len(vocab), abs=1e-9)


def test_fit_rejects_bad_arguments():
    with pytest.raises(ValueError, match="order"):
        fit_ngram(["a"], order=0)
    with pytest.raises(ValueError, match="expected 2"):
        fit_ngram(["a"], order=2, lambdas=(1.0,))
    with pytest.raises(ValueError, match="non-negative"):
        fit_ngram(["a"], order=2, lambdas=(1.5, -0.5))
    with pytest.raises(ValueError, match="sum to 1"):
        fit_ngram(["a"], order=2, lambdas=(0.5, 0.4))
    with pytest.raises(ValueError, match="no sentences"):
        fit_ngram(["", "..."], order=1)


def test_lm_save_load_round_trip(tmp_path):
    lm = fit_ngram(["a b a c", "b a"], order=2, min_count=1)
    path = tmp_path / "lm.json"
    lm.save(path)
    clone = NGramLM.load(path)
    assert clone.vocab == lm.vocab
    for history in [(), ("a",), ("zzz",)]:
        for w in lm.vocab:
            assert clone.probability(w, history) == pytest.approx(
                lm.probability(w, history), abs=1e-15
            )
    assert clone.sentence_logprob("a b") == lm.sentence_logprob("a b")


def test_fitted_model_beats_uniform_on_in_domain_text():
    text = "when was the song released"
    lm = fit_ngram([text, "who released the song"], order=3, min_count=1)
    assert score_cla(lm, text) < len(lm.vocab)


# -- relation predictor ----------------------------------------------------


FOLLOWUP_FRAMES = {
    "release_year": "When was {} released?",
    "director": "Who directed {}?",
    "performer": "Who performed {}?",
    "starring": "Who starred in {}?",
    "spouse": "Who is the spouse of {}?",
}

# 4 names against 5 relations: the cycles decorrelate, so the cue words
# are the only consistent signal
NAMES = ["When I'm Gone", "The Runaway Jury", "Eminem", "Lose Yourself"]


def cue_split(n=40):
    relations = sorted(FOLLOWUP_FRAMES)
    examples = []
    for i in range(n):
        rel = relations[i % len(relations)]
        name = NAMES[i % len(NAMES)]
        examples.append(
            Example(
                id=f"c{i:03d}",
                question=f"Tell me about {name}.",
                answer=f"{name} is well known.",
                mentions=["when_im_gone"],
                gold_entity="when_im_gone",
                gold_relation=rel,
                followup=FOLLOWUP_FRAMES[rel].format(name),
            )
        )
    return CorpusSplit(train=examples[:30], validation=examples[30:], test=[])


def scorer_cfg(**overrides):
    base = dict(
        epochs=40, batch_size=10, patience=40, seed=0, embedding_dim=16,
        hidden_dim=16, lr=0.02, token_dim=12, ctx_dim=12, d_k=4, min_count=1,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def cue_predictor(dialogue_graph):
    model, report = train_relation_predictor(
        cue_split(), dialogue_graph.relations, scorer_cfg()
    )
    assert max(report["val_accuracy"]) == 1.0
    return model


def test_predictor_learns_the_cues(cue_predictor):
    rel, probs = cue_predictor.predict("When was Without Me released?")
    assert rel == "release_year"
    assert probs.shape == (5,)
    assert np.isclose(probs.sum(), 1.0)
    assert cue_predictor.predict("Who directed The Truman Show?")[0] == "director"


def test_predictor_tie_break_is_ascending_id():
    vocab = Vocab.build([["who", "what"]])
    enc = ContextEncoder(vocab, 4, 4, substream(0, "test-pred-tie"))
    model = RelationPredictor(
        enc, ("director", "performer", "release_year"), substream(1, "test-pred-tie")
    )
    model.out.weight.values[...] = 0.0
    model.out.bias.values[...] = 0.0
    rel, probs = model.predict("who what")
    assert rel == "director"
    assert np.allclose(probs, 1.0 / 3.0)


def test_predictor_warns_on_validation_only_relation(caplog):
    split = cue_split(20)
    # rewrite one validation example to a relation unseen in training
    lonely = Example(
        id="v999", question="Q?", answer="A.", mentions=["when_im_gone"],
        gold_entity="when_im_gone", gold_relation="sibling",
        followup="Who is the sibling of Stan?",
    )
    split = CorpusSplit(split.train, split.validation + [lonely], split.test)
    with caplog.at_level(logging.WARNING, logger="fqkit.gricean"):
        train_relation_predictor(
            split, tuple(FOLLOWUP_FRAMES) + ("sibling",), scorer_cfg(epochs=1)
        )
    assert any("never in training" in r.message for r in caplog.records)


def test_predictor_requires_followups():
    bare = Example(
        id="b0", question="Q?", answer="A.", mentions=["x"],
        gold_entity="x", gold_relation="release_year",
    )
    split = CorpusSplit(train=[bare], validation=[], test=[])
    with pytest.raises(ValueError, match="no training examples"):
        train_relation_predictor(split, ("release_year",), scorer_cfg())


def test_predictor_save_load_round_trip(tmp_path, cue_predictor):
    path = tmp_path / "predictor.json"
    cue_predictor.save(path)
    clone = RelationPredictor.load(path)
    assert clone.relations == cue_predictor.relations
    for text in ["When was Stan released?", "Who starred in Alien?"]:
        rel_a, probs_a = cue_predictor.predict(text)
        rel_b, probs_b = clone.predict(text)
        assert rel_a == rel_b
        assert np.allclose(probs_a, probs_b)


# -- coherence classifier --------------------------------------------------


def test_coherence_boundary_probability_counts_as_coherent():
    vocab = Vocab.build([["talk", "more"]])
    enc = ContextEncoder(vocab, 4, 4, substream(2, "test-coh-zero"))
    clf = CoherenceClassifier(enc, 8, substream(3, "test-coh-zero"))
    for p in clf.params().values():
        p.values[...] = 0.0
    bit, p = score_coh(clf, ("talk", "more"), "talk more")
    assert p == 0.5
    assert bit == 1


def test_coherence_requires_two_followup_examples():
    one = Example(
        id="a0", question="Q?", answer="A.", mentions=["x"],
        gold_entity="x", gold_relation="r", followup="F?",
    )
    split = CorpusSplit(train=[one], validation=[], test=[])
    with pytest.raises(ValueError, match="at least 2"):
        train_coherence(split, scorer_cfg())


def test_coherence_training_is_deterministic_and_bounded():
    split = cue_split(20)
    cfg = scorer_cfg(epochs=3)
    clf1, rep1 = train_coherence(split, cfg)
    clf2, rep2 = train_coherence(split, cfg)
    assert rep1["train_loss"] == rep2["train_loss"]
    assert rep1["n_train_pairs"] == 2 * len(split.train)
    p = clf1.p_next("Tell me about Stan.", "Stan is well known.", "Who performed Stan?")
    assert 0.0 < p < 1.0
    assert p == clf2.p_next(
        "Tell me about Stan.", "Stan is well known.", "Who performed Stan?"
    )


def test_coherence_save_load_round_trip(tmp_path):
    clf, _ = train_coherence(cue_split(16), scorer_cfg(epochs=2))
    path = tmp_path / "coherence.json"
    clf.save(path)
    clone = CoherenceClassifier.load(path)
    args = ("Tell me about Eminem.", "Eminem is well known.", "Who directed Eminem?")
    assert clone.p_next(*args) == pytest.approx(clf.p_next(*args), abs=1e-15)


# -- entity-grounded scores ------------------------------------------------


def test_score_rel_gold_mode(dialogue_graph):
    bit, recognized = score_rel(
        dialogue_graph, "When was When I'm Gone released?",
        "when_im_gone", ["when_im_gone"],
    )
    assert (bit, recognized) == (1, "when_im_gone")
    bit, recognized = score_rel(
        dialogue_graph, "When was When I'm Gone released?",
        "runaway_jury", ["runaway_jury", "when_im_gone"],
    )
    assert (bit, recognized) == (0, "when_im_gone")


def test_score_rel_context_set_mode(dialogue_graph):
    bit, recognized = score_rel(
        dialogue_graph, "When was When I'm Gone released?",
        "runaway_jury", ["runaway_jury", "when_im_gone"], mode="context-set",
    )
    assert (bit, recognized) == (1, "when_im_gone")
    bit, _ = score_rel(
        dialogue_graph, "When was When I'm Gone released?",
        "runaway_jury", ["runaway_jury"], mode="context-set",
    )
    assert bit == 0


def test_score_rel_unrecognized_and_bad_mode(dialogue_graph):
    assert score_rel(dialogue_graph, "Nothing links here.", "eminem", []) == (0, None)
    with pytest.raises(ValueError, match="REL mode"):
        score_rel(dialogue_graph, "Q?", "eminem", [], mode="strict")


def test_score_info_star_and_sink(star_graph):
    info, recognized = score_info(star_graph, "Tell me about Hub.")
    assert (info, recognized) == (1.0, "hub")
    info, recognized = score_info(star_graph, "Tell me about Spoke Alpha.")
    assert (info, recognized) == (0.0, "spoke_a")
    assert score_info(star_graph, "Tell me about nothing.") == (0.0, None)


def test_score_truth(dialogue_graph, cue_predictor):
    truth, recognized, predicted = score_truth(
        dialogue_graph, "When was When I'm Gone released?", cue_predictor
    )
    assert (truth, recognized, predicted) == (1, "when_im_gone", "release_year")
    truth, recognized, predicted = score_truth(
        dialogue_graph, "Who directed When I'm Gone?", cue_predictor
    )
    assert (truth, recognized, predicted) == (0, "when_im_gone", "director")
    truth, recognized, _ = score_truth(
        dialogue_graph, "Who directed that thing?", cue_predictor
    )
    assert (truth, recognized) == (0, None)


# -- external score files --------------------------------------------------


def test_read_clarity_file(tmp_path, caplog):
    path = tmp_path / "clarity.jsonl"
    path.write_text(
        json.dumps({"_meta": {"tokenizer": "external", "model": "external"}})
        + "\n"
        + json.dumps({"id": "q1", "logprob_sum": -2.0794415416798357, "n_tokens": 2})
        + "\n"
        + json.dumps({"id": "q2", "logprob_sum": 0.0, "n_tokens": 4})
        + "\n"
    )
    with caplog.at_level(logging.WARNING, logger="fqkit.gricean"):
        scores = read_clarity_file(path)
    assert caplog.records == []
    assert scores["q1"] == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-9)
    assert scores["q2"] == pytest.approx(1.0, abs=1e-12)


def test_read_clarity_file_validation(tmp_path):
    path = tmp_path / "clarity.jsonl"
    path.write_text('{"id": "q1", "logprob_sum": -1.0, "n_tokens": 0}\n')
    with pytest.raises(ValueError, match="n_tokens"):
        read_clarity_file(path)
    path.write_text('{"id": "q1", "logprob_sum": -Infinity, "n_tokens": 2}\n')
    with pytest.raises(ValueError, match="non-finite"):
        read_clarity_file(path)
    path.write_text('{"id": "q1", "n_tokens": 2}\n')
    with pytest.raises(ValueError, match="missing field"):
        read_clarity_file(path)
    path.write_text(
        '{"id": "q1", "logprob_sum": -1.0, "n_tokens": 2}\n'
        '{"id": "q1", "logprob_sum": -2.0, "n_tokens": 2}\n'
    )
    with pytest.raises(ValueError, match="duplicate"):
        read_clarity_file(path)


def test_read_coherence_file(tmp_path):
    path = tmp_path / "coh.jsonl"
    path.write_text('{"id": "q1", "p_next": 0.75}\n{"id": "q2", "p_next": 0.25}\n')
    assert read_coherence_file(path) == {"q1": 0.75, "q2": 0.25}
    path.write_text('{"id": "q1", "p_next": 1.5}\n')
    with pytest.raises(ValueError, match="outside"):
        read_coherence_file(path)


def test_read_questions_file(tmp_path):
    path = tmp_path / "questions.jsonl"
    record = {
        "id": "q1",
        "context": {"question": "Tell me.", "answer": "Sure."},
        "question": "And then?",
    }
    path.write_text(json.dumps(record) + "\n")
    assert read_questions_file(path) == [record]
    path.write_text('{"id": "q1", "question": "no context"}\n')
    with pytest.raises(ValueError, match="expected"):
        read_questions_file(path)
    path.write_text(json.dumps(record) + "\n" + json.dumps(record) + "\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_questions_file(path)
    path.write_text("\n")
    with pytest.raises(ValueError, match="no questions"):
        read_questions_file(path)


# -- score_all -------------------------------------------------------------


def scoreable_questions():
    context = {"question": "Tell me about music.", "answer": "Sure."}
    return [
        {"id": "q2", "context": context, "question": "Who directed The Runaway Jury?"},
        {"id": "q1", "context": context, "question": "When was When I'm Gone released?"},
    ]


def scoreable_examples():
    return {
        "q1": Example(
            id="q1", question="Tell me about music.", answer="Sure.",
            mentions=["when_im_gone"], gold_entity="when_im_gone",
            gold_relation="release_year",
        ),
        "q2": Example(
            id="q2", question="Tell me about music.", answer="Sure.",
            mentions=["runaway_jury"], gold_entity="runaway_jury",
            gold_relation="director",
        ),
    }


def test_score_all_with_external_scores(dialogue_graph, cue_predictor):
    report = score_all(
        dialogue_graph,
        scoreable_questions(),
        scoreable_examples(),
        cue_predictor,
        external_cla={"q1": 4.0, "q2": 9.0},
        external_coh={"q1": 0.9, "q2": 0.4},
    )
    assert report["n_questions"] == 2
    assert [r["id"] for r in report["records"]] == ["q1", "q2"]
    q1, q2 = report["records"]
    assert (q1["rel"], q1["truth"], q1["coh"]) == (1, 1, 1)
    assert (q2["rel"], q2["truth"], q2["coh"]) == (1, 1, 0)
    assert q1["info"] == 1.0  # two distinct edges over two other entities
    assert not q1["unrecognized"]
    agg = report["aggregates"]
    assert agg["rel_pct"] == 100.0
    assert agg["truth_pct"] == 100.0
    assert agg["cla_mean"] == pytest.approx(6.5)
    assert agg["coh_pct"] == 50.0


def test_score_all_external_overrides_builtin(dialogue_graph, cue_predictor):
    lm = fit_ngram(
        ["when was when i'm gone released", "who directed the runaway jury"],
        order=2, min_count=1,
    )
    report = score_all(
        dialogue_graph,
        scoreable_questions(),
        scoreable_examples(),
        cue_predictor,
        lm=lm,
        external_cla={"q2": 123.0},
        external_coh={"q1": 1.0, "q2": 0.0},
    )
    q1, q2 = report["records"]
    assert q1["cla"] == pytest.approx(lm.perplexity("When was When I'm Gone released?"))
    assert q2["cla"] == 123.0


def test_score_all_errors(dialogue_graph, cue_predictor):
    with pytest.raises(ValueError, match="empty question set"):
        score_all(dialogue_graph, [], {}, cue_predictor)
    questions = scoreable_questions()
    with pytest.raises(ValueError, match="not found in the corpus"):
        score_all(
            dialogue_graph, questions, {}, cue_predictor,
            external_cla={"q1": 1.0, "q2": 1.0},
            external_coh={"q1": 1.0, "q2": 1.0},
        )
    with pytest.raises(ValueError, match="no clarity model"):
        score_all(
            dialogue_graph, questions, scoreable_examples(), cue_predictor,
            external_cla={"q1": 1.0},
            external_coh={"q1": 1.0, "q2": 1.0},
        )
    with pytest.raises(ValueError, match="no coherence model"):
        score_all(
            dialogue_graph, questions, scoreable_examples(), cue_predictor,
            external_cla={"q1": 1.0, "q2": 1.0},
            external_coh={"q1": 1.0},
        )


def test_fit_scorers_bundle(dialogue_graph):
    predictor, lm, coherence, report = fit_scorers(
        cue_split(20), dialogue_graph, scorer_cfg(epochs=2), lm_min_count=1
    )
    assert set(report) == {"relation_predictor", "coherence"}
    assert predictor.relations == tuple(sorted(dialogue_graph.relations))
    assert len(lm.vocab) > 1
    p = coherence.p_next("Tell me about Stan.", "Stan is well known.", "Who performed Stan?")
    assert 0.0 < p < 1.0
