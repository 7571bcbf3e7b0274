"""Decompose raw completions into reasoning text and predicted codes."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .taxonomy import LabelSet, is_valid_code

OPEN_TAG = "<reasoning>"
CLOSE_TAG = "</reasoning>"

# Shape of an HFACS code; used to tell hallucinated codes apart from prose.
CODE_LIKE = re.compile(r"[A-Z]{2}[0-9]{3}")


@dataclass(frozen=True)
class ParsedCompletion:
    raw: str
    reasoning_text: str | None
    tail: str
    predicted: LabelSet
    invalid_tokens: frozenset[str]
    wellformed_tags: bool


def parse_completion(raw: str) -> ParsedCompletion:
    """Split ``raw`` at the first ``<reasoning>...</reasoning>`` pair.

    Codes are read from the text after the closing tag. Without a well-formed
    pair the whole text is scanned, so correctness can still be scored.
    """
    reasoning = None
    tail = raw
    wellformed = False
    start = raw.find(OPEN_TAG)
    if start >= 0:
        end = raw.find(CLOSE_TAG, start + len(OPEN_TAG))
        if end >= 0:
            wellformed = True
            reasoning = raw[start + len(OPEN_TAG):end].strip()
            tail = raw[end + len(CLOSE_TAG):]

    valid: set[str] = set()
    invalid: set[str] = set()
    for tok in tail.split():
        if is_valid_code(tok):
            valid.add(tok)
        elif CODE_LIKE.fullmatch(tok):
            invalid.add(tok)

    return ParsedCompletion(
        raw=raw,
        reasoning_text=reasoning,
        tail=tail,
        predicted=LabelSet(valid),
        invalid_tokens=frozenset(invalid),
        wellformed_tags=wellformed,
    )
