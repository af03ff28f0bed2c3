"""Offset-preserving caption tokenizer.

Tokens are word runs (letters/digits with internal apostrophes or hyphens) or
single punctuation characters. Character offsets are kept so SpaceAfter can be
derived exactly and detokenization reproduces the input byte-for-byte for
single-spaced text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_TOKEN = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*|\S", re.UNICODE)


@dataclass(frozen=True)
class RawToken:
    form: str
    start: int
    end: int
    space_after: bool


def tokenize(text: str) -> list[RawToken]:
    matches = list(_TOKEN.finditer(text))
    tokens = []
    for i, match in enumerate(matches):
        if i + 1 < len(matches):
            space_after = text[match.end() : matches[i + 1].start()] == " "
        else:
            space_after = False
        tokens.append(RawToken(match.group(), match.start(), match.end(), space_after))
    return tokens


def detokenize(tokens: list[RawToken]) -> str:
    parts = []
    for tok in tokens:
        parts.append(tok.form)
        if tok.space_after:
            parts.append(" ")
    return "".join(parts)
