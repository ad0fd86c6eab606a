"""Vocabulary and mean-pool encoder tests."""

import numpy as np
import pytest

from fqkit.encoder import SEP_ID, SEP_TOKEN, UNK_ID, UNK_TOKEN, ContextEncoder, Vocab
from fqkit.nn import grad_check
from fqkit.rngs import substream
from fqkit.text import tokenize


def small_encoder(texts, token_dim=4, out_dim=3, seed=7):
    vocab = Vocab.build([tokenize(t) for t in texts])
    rng = substream(seed, "test-encoder")
    return ContextEncoder(vocab, token_dim, out_dim, rng)


# -- vocabulary ------------------------------------------------------------


def test_reserved_slots():
    vocab = Vocab.build([["b", "a"]])
    assert vocab.tokens[:2] == [UNK_TOKEN, SEP_TOKEN]
    assert UNK_ID == 0 and SEP_ID == 1
    assert vocab.encode(["a", "b"]) == [2, 3]
    assert vocab.encode(["zzz"]) == [UNK_ID]


def test_vocab_sorted_and_min_count():
    vocab = Vocab.build([["pear", "apple", "pear"], ["fig"]], min_count=2)
    assert vocab.tokens == [UNK_TOKEN, SEP_TOKEN, "pear"]
    assert vocab.encode(["apple", "fig"]) == [UNK_ID, UNK_ID]


def test_vocab_rejects_bad_front_matter():
    with pytest.raises(ValueError, match="reserved"):
        Vocab(["a", "b"])
    with pytest.raises(ValueError, match="duplicate"):
        Vocab([UNK_TOKEN, SEP_TOKEN, "a", "a"])


def test_tokenizer_never_emits_separator():
    # angle brackets are stripped, so the literal string cannot collide
    assert SEP_TOKEN not in tokenize("a <sep> b")


# -- forward ---------------------------------------------------------------


def test_empty_input_degrades_to_bias():
    enc = small_encoder(["one two"])
    out = enc.encode_ids([])
    assert np.allclose(out, enc.output.bias.values)


def test_mean_pooling_is_order_invariant():
    enc = small_encoder(["red blue green"])
    ids_a = enc.vocab.encode(["red", "blue"])
    ids_b = enc.vocab.encode(["blue", "red"])
    assert np.allclose(enc.encode_ids(ids_a), enc.encode_ids(ids_b))


def test_repeated_token_equals_singleton_mean():
    enc = small_encoder(["red blue"])
    one = enc.encode_ids(enc.vocab.encode(["red"]))
    many = enc.encode_ids(enc.vocab.encode(["red", "red", "red"]))
    assert np.allclose(one, many)


def test_encode_context_concatenates_question_and_answer():
    enc = small_encoder(["when was it", "in the year"])
    joint = enc.encode_context("when was it", "in the year")
    ids = enc.vocab.encode(tokenize("when was it") + tokenize("in the year"))
    assert np.allclose(joint, enc.encode_ids(ids))


def test_encode_pair_splices_separator():
    enc = small_encoder(["alpha beta", "gamma"])
    out = enc.encode_pair(["alpha"], ["gamma"])
    ids = enc.vocab.encode(["alpha"]) + [SEP_ID] + enc.vocab.encode(["gamma"])
    assert np.allclose(out, enc.encode_ids(ids))
    # the separator row participates, so the pair differs from plain concat
    plain = enc.encode_ids(enc.vocab.encode(["alpha", "gamma"]))
    assert not np.allclose(out, plain)


# -- backward --------------------------------------------------------------


def test_encoder_gradients():
    enc = small_encoder(["silver harbor ancient forest"], token_dim=5, out_dim=4)
    ids = enc.vocab.encode(tokenize("silver harbor silver"))
    target = substream(11, "test-encoder-target").normal(size=4)

    def loss_fn():
        enc.zero_grad()
        out = enc.encode_ids(ids)
        diff = out - target
        enc.backward(2.0 * diff)
        return float(np.sum(diff * diff))

    assert grad_check(loss_fn, enc.params()) < 1e-6


def test_backward_with_empty_input_only_touches_output_layer():
    enc = small_encoder(["one"])
    enc.zero_grad()
    enc.encode_ids([])
    enc.backward(np.ones(3))
    assert np.allclose(enc.embedding.table.grad, 0.0)
    assert not np.allclose(enc.output.bias.grad, 0.0)


# -- persistence -----------------------------------------------------------


def test_round_trip_through_extra_block():
    enc = small_encoder(["silver harbor", "golden forest"])
    params = {f"encoder.{k}": v for k, v in enc.param_arrays().items()}
    clone = ContextEncoder.from_extra(enc.config_extra(), params, "encoder.")
    ids = enc.vocab.encode(["silver", "forest"])
    assert np.allclose(enc.encode_ids(ids), clone.encode_ids(ids))


def test_from_extra_shape_mismatch():
    enc = small_encoder(["one two"])
    params = {f"encoder.{k}": v for k, v in enc.param_arrays().items()}
    params["encoder.output.weight"] = np.zeros((2, 2))
    with pytest.raises(ValueError, match="shape"):
        ContextEncoder.from_extra(enc.config_extra(), params, "encoder.")
