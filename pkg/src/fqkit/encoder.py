"""Mean-pooled trainable text encoder.

Produces the dialogue-history vector h_qa consumed by the selection heads
and the scorer classifiers. Tokens are embedded through a trainable
table, mean-pooled, and passed through one linear output layer. An empty
token list pools to the zero vector, so the encoder output degrades to
the output layer's bias.

Index 0 of every vocabulary is the unknown token and index 1 a reserved
separator; the separator is never produced by tokenization (angle
brackets are stripped), so callers can safely splice it between segments.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .nn import DTYPE, Dense, Embedding, Module
from .text import tokenize

UNK_TOKEN = "<unk>"
SEP_TOKEN = "<sep>"
UNK_ID = 0
SEP_ID = 1


class Vocab:
    """Token to id mapping with reserved unknown and separator slots."""

    def __init__(self, tokens: list[str]):
        if tokens[:2] != [UNK_TOKEN, SEP_TOKEN]:
            raise ValueError("vocabulary must start with the reserved tokens")
        self._tokens = list(tokens)
        self._index = {t: i for i, t in enumerate(tokens)}
        if len(self._index) != len(tokens):
            raise ValueError("duplicate token in vocabulary")

    @classmethod
    def build(cls, token_lists: list[list[str]], min_count: int = 1) -> "Vocab":
        counts = Counter()
        for toks in token_lists:
            counts.update(toks)
        kept = sorted(t for t, c in counts.items() if c >= min_count)
        return cls([UNK_TOKEN, SEP_TOKEN] + kept)

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def encode(self, toks: list[str]) -> list[int]:
        return [self._index.get(t, UNK_ID) for t in toks]


class ContextEncoder(Module):
    def __init__(self, vocab: Vocab, token_dim: int, out_dim: int, rng: np.random.Generator):
        self.vocab = vocab
        self.token_dim = token_dim
        self.out_dim = out_dim
        self.embedding = Embedding(len(vocab), token_dim, rng)
        self.output = Dense(token_dim, out_dim, rng)
        self._n: int = 0

    def encode_ids(self, ids: list[int]) -> np.ndarray:
        self._n = len(ids)
        if not ids:
            pooled = np.zeros(self.token_dim, dtype=DTYPE)
        else:
            rows = self.embedding.forward(np.asarray(ids, dtype=np.int64))
            pooled = rows.mean(axis=0)
        return self.output.forward(pooled)

    def backward(self, dout: np.ndarray) -> None:
        dpooled = self.output.backward(dout)
        if self._n:
            self.embedding.backward(
                np.broadcast_to(dpooled / self._n, (self._n, self.token_dim))
            )

    def encode_context(self, question: str, answer: str) -> np.ndarray:
        """h_qa for one dialogue history: tokenized Q concatenated with A."""
        toks = tokenize(question) + tokenize(answer)
        return self.encode_ids(self.vocab.encode(toks))

    def encode_pair(self, context_tokens: list[str], question_tokens: list[str]) -> np.ndarray:
        """Encoding of context <sep> candidate, for next-utterance scoring."""
        ids = (
            self.vocab.encode(context_tokens) + [SEP_ID] + self.vocab.encode(question_tokens)
        )
        return self.encode_ids(ids)

    # -- persistence pieces (embedded in the owning model's checkpoint) ----

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.values for name, p in self.params().items()}

    def config_extra(self) -> dict:
        return {
            "vocab": self.vocab.tokens,
            "token_dim": self.token_dim,
            "out_dim": self.out_dim,
        }

    @classmethod
    def from_extra(cls, extra: dict, params: dict[str, np.ndarray], prefix: str) -> "ContextEncoder":
        """Rebuild from a checkpoint's extra block and its param arrays.

        ``prefix`` selects this encoder's parameters inside a larger model
        checkpoint (e.g. "encoder.").
        """
        vocab = Vocab(list(extra["vocab"]))
        rng = np.random.default_rng(0)
        enc = cls(vocab, int(extra["token_dim"]), int(extra["out_dim"]), rng)
        for name, p in enc.params().items():
            stored = params[f"{prefix}{name}"]
            if stored.shape != p.values.shape:
                raise ValueError(
                    f"encoder parameter {name!r}: shape {stored.shape}, "
                    f"expected {p.values.shape}"
                )
            p.values[...] = stored
        return enc
