"""Pluggable text-encoder providers.

A provider maps texts to fixed-dimension real vectors. The defaults are
deterministic and dependency-free so the clustering and classification
pipeline can run without any hosted model; precomputed vectors from a real
sentence encoder can be supplied through TableProvider.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from typing import Protocol, Sequence

import numpy as np

from .errors import EncoderUnavailable

DEFAULT_DIM = 768
DEFAULT_MAX_LEN = 128


class EncoderProvider(Protocol):
    provider_id: str
    dim: int
    max_len: int

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


def _truncate(tokens: list[str], max_len: int, text: str) -> list[str]:
    if len(tokens) > max_len:
        warnings.warn(f"input truncated to {max_len} tokens: {text[:40]!r}...")
        return tokens[:max_len]
    return tokens


def _token_vector(token: str, dim: int) -> np.ndarray:
    """Deterministic signed one-hot via md5 feature hashing."""
    digest = hashlib.md5(token.encode("utf-8")).digest()
    idx = int.from_bytes(digest[:8], "big") % dim
    sign = 1.0 if digest[8] % 2 == 0 else -1.0
    v = np.zeros(dim)
    v[idx] = sign
    return v


class HashedProvider:
    """Feature-hashed bag of tokens, unit-normalized. Order-insensitive."""

    def __init__(self, dim: int = DEFAULT_DIM, max_len: int = DEFAULT_MAX_LEN):
        self.dim = dim
        self.max_len = max_len
        self.provider_id = f"hashed:d={dim}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            tokens = _truncate(text.split(), self.max_len, text)
            for tok in tokens:
                out[i] += _token_vector(tok, self.dim)
            norm = np.linalg.norm(out[i])
            if norm > 0:
                out[i] /= norm
        return out


class TokenAveragingProvider:
    """Mean of unit per-token hashed vectors; embed("x y") equals the mean of
    embed("x") and embed("y")."""

    def __init__(self, dim: int = DEFAULT_DIM, max_len: int = DEFAULT_MAX_LEN):
        self.dim = dim
        self.max_len = max_len
        self.provider_id = f"token-avg:d={dim}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            tokens = _truncate(text.split(), self.max_len, text)
            if tokens:
                out[i] = np.mean([_token_vector(t, self.dim) for t in tokens], axis=0)
        return out


class TableProvider:
    """Looks texts up in a precomputed text -> vector table (JSON file or dict)."""

    def __init__(self, table: dict[str, Sequence[float]], dim: int | None = None,
                 max_len: int = DEFAULT_MAX_LEN, provider_id: str = "table"):
        if not table:
            raise EncoderUnavailable("empty embedding table")
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        dims = {v.shape[0] for v in self.table.values()}
        if len(dims) != 1:
            raise EncoderUnavailable(f"inconsistent vector dimensions in table: {sorted(dims)}")
        self.dim = dim if dim is not None else dims.pop()
        self.max_len = max_len
        self.provider_id = provider_id

    @classmethod
    def from_file(cls, path) -> "TableProvider":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        vectors = obj.get("vectors", obj)
        return cls(vectors, dim=obj.get("dim") if isinstance(obj, dict) else None,
                   provider_id=f"table:{path}")

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            if text not in self.table:
                raise EncoderUnavailable(f"text not in embedding table: {text!r}")
            out[i] = self.table[text]
        return out


def embed(texts: Sequence[str], provider: EncoderProvider) -> np.ndarray:
    """Encode texts, checking the provider keeps its declared dimension."""
    try:
        vectors = provider.encode(texts)
    except EncoderUnavailable:
        raise
    except Exception as exc:
        raise EncoderUnavailable(str(exc)) from exc
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape != (len(texts), provider.dim):
        raise EncoderUnavailable(
            f"provider returned shape {vectors.shape}, expected {(len(texts), provider.dim)}")
    if not np.all(np.isfinite(vectors)):
        raise EncoderUnavailable("provider returned non-finite values")
    return vectors


def make_provider(spec: str, dim: int = DEFAULT_DIM) -> EncoderProvider:
    """Build a provider from a CLI-style spec: 'hashed', 'token-avg', 'table:<path>'."""
    if spec == "hashed":
        return HashedProvider(dim=dim)
    if spec == "token-avg":
        return TokenAveragingProvider(dim=dim)
    if spec.startswith("table:"):
        return TableProvider.from_file(spec[len("table:"):])
    raise EncoderUnavailable(f"unknown provider spec: {spec!r}")
