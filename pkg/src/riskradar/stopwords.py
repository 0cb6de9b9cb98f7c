"""Fixed English stopword list, versioned for reproducibility.

Small on purpose: keyword sets must be stable across releases, so coverage
loses to determinism here. Bump the version when the list changes.
"""
from __future__ import annotations

from pathlib import Path

STOPWORDS_VERSION = 1

STOPWORDS: frozenset[str] = frozenset(
    """
    a an and are as at be been but by can could did do does for from had has
    have he her his if in is it its may might no not of on or our she so such
    than that the their then there these they this those to was we were will
    with would you
    """.split()
)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Return the built-in list, or a newline-delimited override file."""
    if path is None:
        return STOPWORDS
    words = {
        line.strip().lower()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    }
    return frozenset(words)
