"""Deterministic text embeddings: hashed character trigrams plus pattern flags."""

from __future__ import annotations

import re
from typing import Protocol

import numpy as np

_NUMBERING = re.compile(r"^\s*(\d+(\.\d+)*\.?|[IVXLC]+\.|[A-Z]\.)\s+\S")
_MIX = np.uint64(0x9E3779B97F4A7C15)


class TextEmbedder(Protocol):
    dim: int

    def __call__(self, text: str) -> np.ndarray: ...


class HashedTrigramEmbedder:
    """Mean-pooled, L2-normalized trigram histogram followed by four flags.

    Flags: leading section numbering, upper-case ratio among letters,
    digit ratio among characters, and a coarse length bucket in [0, 1].
    """

    n_flags = 4

    def __init__(self, buckets: int = 64):
        self.buckets = buckets
        self.dim = buckets + self.n_flags

    def trigram_histogram(self, text: str) -> np.ndarray:
        out = np.zeros(self.buckets)
        if not text:
            return out
        cps = np.frombuffer(f" {text.lower()} ".encode("utf-32-le"), dtype=np.uint32).astype(np.uint64)
        if len(cps) < 3:
            return out
        with np.errstate(over="ignore"):
            keys = (cps[:-2] << np.uint64(42)) ^ (cps[1:-1] << np.uint64(21)) ^ cps[2:]
            mixed = (keys * _MIX) >> np.uint64(32)
        idx = (mixed % np.uint64(self.buckets)).astype(np.intp)
        out += np.bincount(idx, minlength=self.buckets) / len(idx)
        norm = np.linalg.norm(out)
        return out / norm if norm > 0 else out

    @staticmethod
    def flags(text: str) -> np.ndarray:
        if not text:
            return np.zeros(4)
        letters = [c for c in text if c.isalpha()]
        caps = sum(c.isupper() for c in letters) / len(letters) if letters else 0.0
        digits = sum(c.isdigit() for c in text) / len(text)
        numbered = 1.0 if _NUMBERING.match(text) else 0.0
        length_bucket = min(len(text) // 20, 10) / 10
        return np.array([numbered, caps, digits, length_bucket])

    def __call__(self, text: str) -> np.ndarray:
        return np.concatenate([self.trigram_histogram(text), self.flags(text)])
