"""Fixed next-sentence scorer over content-token overlap.

Desk-scale stand-in for a pretrained next-sentence model: a logistic
over the Jaccard overlap between the context's content tokens and the
candidate question's. The two parameters are frozen constants, so the
scorer behaves like any other pretrained backbone: deterministic, no
training step, identical inputs give identical outputs.
"""

import math
import re

_WORD = re.compile(r"[0-9a-z]+")
# p = 0.5 at 25% overlap; saturates near 0.18 / 0.99 at the extremes
_WEIGHT, _BIAS = 6.0, -1.5

BUILTIN_NAME = "overlap-nsp"


def _content(text: str) -> set[str]:
    return set(_WORD.findall(text.casefold()))


class OverlapNextSentence:
    name = BUILTIN_NAME
    tokenizer = "content-words-v1"

    def p_next(self, context_question: str, context_answer: str, question: str) -> float:
        target = _content(question)
        if not target:
            raise ValueError("tokenization yielded zero tokens")
        context = _content(context_question) | _content(context_answer)
        union = context | target
        overlap = len(context & target) / len(union)
        return 1.0 / (1.0 + math.exp(-(_WEIGHT * overlap + _BIAS)))


def load_next_sentence(name: str) -> OverlapNextSentence:
    if name != BUILTIN_NAME:
        raise ValueError(
            f"model load failure: unknown next-sentence model {name!r} "
            f"(available: {BUILTIN_NAME})"
        )
    return OverlapNextSentence()
