"""Shared text normalization.

Every component that looks at natural-language text (entity linking, the
context encoder, n-gram language models, ROUGE) tokenizes through this
module so that a mention matched by the linker is guaranteed to be visible
to the encoder and the scorers under the same segmentation.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Case-fold and split on any run of non-alphanumeric characters.

    Returns the list of tokens; empty input (or input with no alphanumeric
    characters at all) yields an empty list.
    """
    return _TOKEN_RE.findall(text.casefold())


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    """Like :func:`tokenize` but with (token, start, end) character offsets.

    Offsets index the case-folded string. Python's casefold can change
    string length for a handful of characters, so offsets are only
    guaranteed to map back onto the original text when folding is
    length-preserving (true for ASCII, which is all the bundled data uses).
    """
    folded = text.casefold()
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(folded)]
