"""Small causal language model over whitespace tokens.

Desk-scale stand-in for a pretrained dialogue LM: next-token NLL
training on serialized dialogue sequences, natural-log token
probabilities for perplexity-style scoring, and beam-search decoding
that stops at the first eos token. Model directories are plain JSON so
artifacts stay auditable and byte-reproducible.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

DEFAULT_EOS = "<|endoftext|>"
TOKENIZER_ID = "whitespace-v1"
UNK, BOS = "<unk>", "<bos>"
UNK_ID, BOS_ID = 0, 1
ARCHITECTURES = ("gru-causal",)


class ModelLoadError(Exception):
    pass


def tokenize(text: str, eos: str = DEFAULT_EOS) -> list[str]:
    """Whitespace tokens, with the eos marker split off even when glued."""
    if eos:
        text = text.replace(eos, f" {eos} ")
    return text.split()


class Vocab:
    """Token table with fixed <unk>/<bos> slots, data tokens sorted."""

    def __init__(self, tokens: list[str]):
        if tokens[:2] != [UNK, BOS]:
            raise ValueError("vocab must start with the reserved tokens")
        self.tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("duplicate token in vocab")

    @classmethod
    def build(cls, token_lines: list[list[str]]) -> "Vocab":
        seen = {t for line in token_lines for t in line}
        seen.discard(UNK)
        seen.discard(BOS)
        return cls([UNK, BOS] + sorted(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.id(t) for t in tokens]


class TinyCausalLM(nn.Module):
    def __init__(self, vocab_size: int, emb_dim: int, hidden_dim: int):
        super().__init__()
        self.emb = nn.Embedding(vocab_size, emb_dim)
        self.gru = nn.GRU(emb_dim, hidden_dim, batch_first=True)
        self.out = nn.Linear(hidden_dim, vocab_size)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        hidden, _ = self.gru(self.emb(ids))
        return self.out(hidden)


@dataclass
class CausalTrainConfig:
    epochs: int = 30
    batch_size: int = 8
    lr: float = 5e-3
    emb_dim: int = 32
    hidden_dim: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "lr", "emb_dim", "hidden_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def train_causal_lm(
    lines: list[str],
    eos: str = DEFAULT_EOS,
    cfg: CausalTrainConfig | None = None,
) -> tuple[TinyCausalLM, Vocab, dict]:
    """NLL training over whole serialized lines; returns per-epoch mean loss."""
    if not lines:
        raise ValueError("no training sequences")
    cfg = cfg or CausalTrainConfig()
    token_lines = [tokenize(line, eos) for line in lines]
    vocab = Vocab.build(token_lines)
    seqs = [[BOS_ID] + vocab.encode(toks) for toks in token_lines]

    torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    model = TinyCausalLM(len(vocab), cfg.emb_dim, cfg.hidden_dim)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    order_gen = torch.Generator().manual_seed(cfg.seed)

    losses = []
    for _ in range(cfg.epochs):
        order = torch.randperm(len(seqs), generator=order_gen).tolist()
        epoch_loss, epoch_tokens = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [seqs[i] for i in order[start : start + cfg.batch_size]]
            width = max(len(s) for s in batch) - 1
            x = torch.zeros(len(batch), width, dtype=torch.long)
            y = torch.full((len(batch), width), -100, dtype=torch.long)
            for row, seq in enumerate(batch):
                n = len(seq) - 1
                x[row, :n] = torch.tensor(seq[:-1])
                y[row, :n] = torch.tensor(seq[1:])
            logits = model(x)
            loss = F.cross_entropy(
                logits.reshape(-1, len(vocab)), y.reshape(-1), ignore_index=-100
            )
            opt.zero_grad()
            loss.backward()
            opt.step()
            n_tokens = int((y != -100).sum())
            epoch_loss += loss.item() * n_tokens
            epoch_tokens += n_tokens
        losses.append(epoch_loss / epoch_tokens)
    model.eval()
    report = {"epochs_run": cfg.epochs, "train_loss": losses, "n_sequences": len(seqs)}
    return model, vocab, report


@torch.no_grad()
def token_logprobs(model: TinyCausalLM, vocab: Vocab, tokens: list[str]) -> list[float]:
    """Natural-log probability of each token given its prefix."""
    if not tokens:
        raise ValueError("tokenization yielded zero tokens")
    ids = [BOS_ID] + vocab.encode(tokens)
    x = torch.tensor([ids[:-1]], dtype=torch.long)
    logp = F.log_softmax(model(x), dim=-1)
    return [float(logp[0, i, ids[i + 1]]) for i in range(len(ids) - 1)]


@torch.no_grad()
def beam_decode(
    model: TinyCausalLM,
    vocab: Vocab,
    prefix_tokens: list[str],
    eos: str = DEFAULT_EOS,
    beam: int = 2,
    max_len: int = 30,
) -> list[str]:
    """Beam search continuation of the prefix, stopped at the first eos.

    Beams are ranked by total log-probability during search and by
    length-normalized log-probability for the final pick. Reserved
    tokens are masked out of every step's distribution.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    eos_id = vocab.id(eos)
    if eos_id == UNK_ID:
        raise ValueError("eos token missing from the model vocabulary")
    ids = [BOS_ID] + vocab.encode(prefix_tokens)
    hidden, state = model.gru(model.emb(torch.tensor([ids], dtype=torch.long)))
    logits = model.out(hidden[0, -1])

    live = [(0.0, [], state, logits)]
    finished: list[tuple[float, list[int]]] = []
    for _ in range(max_len):
        candidates = []
        for score, toks, state, logits in live:
            logp = F.log_softmax(logits, dim=-1).clone()
            logp[UNK_ID] = float("-inf")
            logp[BOS_ID] = float("-inf")
            top = torch.topk(logp, min(beam, len(vocab) - 2))
            for lp, tid in zip(top.values.tolist(), top.indices.tolist()):
                candidates.append((score + lp, toks + [tid], state))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        live = []
        for score, toks, state in candidates[: beam]:
            if toks[-1] == eos_id:
                finished.append((score, toks[:-1]))
            else:
                step_in = model.emb(torch.tensor([[toks[-1]]], dtype=torch.long))
                out, next_state = model.gru(step_in, state)
                live.append((score, toks, next_state, model.out(out[0, -1])))
        if not live or len(finished) >= beam:
            break
    pool = finished or [(score, toks) for score, toks, _, _ in live]
    best = max(pool, key=lambda c: (c[0] / max(len(c[1]), 1), c[1]))
    return [vocab.tokens[i] for i in best[1]]


# -- model directory -------------------------------------------------------


def save_causal(
    path,
    model: TinyCausalLM,
    vocab: Vocab,
    eos: str,
    name: str,
) -> None:
    payload = {
        "kind": "causal_lm",
        "model": name,
        "tokenizer": TOKENIZER_ID,
        "eos": eos,
        "emb_dim": model.emb.embedding_dim,
        "hidden_dim": model.gru.hidden_size,
        "vocab": vocab.tokens,
        "params": {k: v.tolist() for k, v in model.state_dict().items()},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_causal(path) -> tuple[TinyCausalLM, Vocab, str, dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "model.json"
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("kind") != "causal_lm":
            raise ValueError(f"not a causal_lm file: kind={payload.get('kind')!r}")
        vocab = Vocab(payload["vocab"])
        model = TinyCausalLM(len(vocab), payload["emb_dim"], payload["hidden_dim"])
        model.load_state_dict(
            {k: torch.tensor(v) for k, v in payload["params"].items()}
        )
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        raise ModelLoadError(f"model load failure for {path}: {exc}") from exc
    model.eval()
    meta = {"model": payload["model"], "tokenizer": payload["tokenizer"]}
    return model, vocab, payload["eos"], meta
