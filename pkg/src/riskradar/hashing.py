"""64-bit FNV-1a, the one hash everything content-addressed here agrees on.

Pure-python and bit-exact across platforms; news ids, feature slots and the
vector-cache keys all derive from it.
"""
from __future__ import annotations

FNV64_OFFSET_BASIS = 14695981039346656037
FNV64_PRIME = 1099511628211
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """FNV-1a over ``data``, returned as an unsigned 64-bit integer."""
    h = FNV64_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def fnv1a_64_hex(data: bytes) -> str:
    """Lowercase 16-char hex form of :func:`fnv1a_64`."""
    return format(fnv1a_64(data), "016x")


def content_id(url: str, headline: str) -> str:
    """Content-addressed news id: FNV-1a over ``url + "\\n" + headline``."""
    return fnv1a_64_hex((url + "\n" + headline).encode("utf-8"))
