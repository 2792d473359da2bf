"""Embedding providers.

A provider maps a token sequence to one vector per token.  Providers are
frozen: the ranker never updates them, so a provider is fully described by
its name, version and dimension.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np


@runtime_checkable
class EmbeddingProvider(Protocol):
    name: str
    version: str
    dim: int

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        """``(len(tokens), dim)`` float32 array."""

    def context_fit(self, candidate: Sequence[str], left: Sequence[str], right: Sequence[str]) -> float:
        """Compatibility of ``candidate`` with the slot between ``left`` and ``right``."""


def cache_dir() -> Path | None:
    """Directory for embedding caches, from ``POVSHIFT_CACHE`` (unset: no cache)."""
    value = os.environ.get("POVSHIFT_CACHE")
    return Path(value) if value else None


class HashEmbeddingProvider:
    """Deterministic, context-free embeddings seeded from a SHA-256 digest of
    the token.  Offline stand-in for a pretrained contextual encoder."""

    name = "hash"

    def __init__(self, dim: int = 32, salt: str = "v1"):
        self.dim = int(dim)
        self.salt = salt
        self.version = f"hash-{salt}-d{self.dim}"
        self._memo: dict[str, np.ndarray] = {}

    def vector(self, token: str) -> np.ndarray:
        v = self._memo.get(token)
        if v is None:
            digest = hashlib.sha256(f"{self.salt}\x00{token}".encode("utf-8")).digest()
            rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
            v = (rng.standard_normal(self.dim) / np.sqrt(self.dim)).astype(np.float32)
            self._memo[token] = v
        return v

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([self.vector(t) for t in tokens])

    def context_fit(self, candidate: Sequence[str], left: Sequence[str], right: Sequence[str]) -> float:
        """Negative distance between the mean candidate vector and the mean
        vector of the five tokens on each side of the slot."""
        ctx = list(left[-5:]) + list(right[:5])
        if not candidate or not ctx:
            return 0.0
        a = self.embed(list(candidate)).mean(axis=0)
        b = self.embed(ctx).mean(axis=0)
        return -float(np.linalg.norm(a - b))


_REGISTRY = {"hash": HashEmbeddingProvider}


def get_provider(spec: str = "hash") -> EmbeddingProvider:
    """``"hash"`` or ``"hash:64"`` (dimension), or ``"module:callable"`` for
    an external provider factory."""
    name, _, arg = spec.partition(":")
    if name in _REGISTRY:
        return _REGISTRY[name](int(arg)) if arg else _REGISTRY[name]()
    import importlib

    module = importlib.import_module(name)
    factory = getattr(module, arg)
    return factory()
