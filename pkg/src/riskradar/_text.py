"""Shared word tokenization used by the encoder, keyword matching and the
evaluation corpus generator. One regex so all three agree on what a word is."""
from __future__ import annotations

import re

# Runs of letters/digits optionally joined by single hyphens; underscores are
# separators, not word characters ("us-china" is one token, "a_b" is two).
WORD_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)*", re.UNICODE)


def word_tokens(text: str) -> list[str]:
    return WORD_RE.findall(text.lower())
