"""Sentence encoders.

Two backends:

- ``hash-<dim>``: a deterministic lexical feature hasher.  It needs no
  model weights and no network, produces the same vector for the same
  text on every platform, and never emits a zero row.  It exists so the
  export pipeline can run and be tested completely offline; it is not a
  semantic model.
- any other identifier is treated as a sentence-transformers model name
  and resolved lazily.  Those models mean-pool their final layer unless
  the model card defines a different sentence vector.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence

import numpy as np

_HASH_ID = re.compile(r"hash-(\d+)$")
_TOKEN = re.compile(r"[a-z0-9]+")


class ModelLoadError(Exception):
    """The requested model could not be resolved or loaded."""


class Encoder(Protocol):
    dim: int

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _feature_hash(feature: bytes) -> int:
    # blake2b is stable across runs and platforms, unlike hash()
    return int.from_bytes(hashlib.blake2b(feature, digest_size=8).digest(), "little")


class HashEncoder:
    """Signed feature hashing of words and character trigrams."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ModelLoadError(f"hash encoder dim must be >= 1, got {dim}")
        self.dim = dim

    def _features(self, text: str):
        for word in _TOKEN.findall(text.lower()):
            yield b"w:" + word.encode("utf-8"), 1.0
            padded = f"^{word}$"
            for k in range(len(padded) - 2):
                yield b"g:" + padded[k : k + 3].encode("utf-8"), 0.5

    def encode_one(self, text: str) -> np.ndarray:
        row = np.zeros(self.dim, dtype=np.float64)
        for feature, weight in self._features(text):
            h = _feature_hash(feature)
            sign = 1.0 if h & 1 else -1.0
            row[(h >> 1) % self.dim] += sign * weight
        if not row.any():
            # tokenless text (empty, punctuation only): fall back to a
            # bucket keyed on the raw bytes so the row stays nonzero
            row[_feature_hash(b"r:" + text.encode("utf-8")) % self.dim] = 1.0
        return row

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.encode_one(t) for t in texts])


class _SentenceTransformerEncoder:
    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelLoadError(
                f"model {model_id!r} needs the sentence-transformers package: {exc}"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise ModelLoadError(f"could not load model {model_id!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray(
            self._model.encode(list(texts), convert_to_numpy=True, show_progress_bar=False),
            dtype=np.float64,
        )


def load_encoder(model_id: str) -> Encoder:
    m = _HASH_ID.match(model_id)
    if m:
        return HashEncoder(int(m.group(1)))
    return _SentenceTransformerEncoder(model_id)
