"""Synthetic labeled corpora with constructed embedding geometry.

These generators make small, fully controlled fixtures: separable
clusters, deliberately entangled clusters, multi-label mixtures, and
pure-noise baselines.  They exist so the whole pipeline can be exercised
and evaluated without any embedding model.
"""

from __future__ import annotations

import numpy as np

from .store import Corpus, EmbeddingMatrix, SemanticSet, Sentence

DEFAULT_LABELS = ("alpha", "beta", "gamma", "delta", "epsilon", "zeta")


def _label_names(n: int) -> list[str]:
    if n <= len(DEFAULT_LABELS):
        return list(DEFAULT_LABELS[:n])
    return [f"class{i}" for i in range(n)]


def _orthonormal_frame(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """count orthonormal rows of length dim, deterministic given rng."""
    if count > dim:
        raise ValueError(f"cannot fit {count} orthonormal vectors in dim {dim}")
    raw = rng.normal(size=(dim, count))
    q, r = np.linalg.qr(raw)
    # fix signs so the frame does not depend on QR's sign convention
    q = q * np.sign(np.diag(r))
    return q.T


def _build(
    ids: list[str], texts: list[str], labels: list[tuple[str, ...]], rows: np.ndarray
) -> tuple[Corpus, EmbeddingMatrix]:
    corpus = Corpus(
        [Sentence(id=i, text=t, labels=lb) for i, t, lb in zip(ids, texts, labels)]
    )
    return corpus, EmbeddingMatrix(ids, rows.astype(np.float32))


def orthogonal_clusters(
    n_classes: int = 3, per_class: int = 30, dim: int = 16
) -> tuple[Corpus, EmbeddingMatrix]:
    """Noiseless one-hot clusters: every sentence of class i sits exactly
    on basis vector i.  Perfectly separable by construction."""
    if n_classes > dim:
        raise ValueError("need dim >= n_classes for one-hot clusters")
    names = _label_names(n_classes)
    ids, texts, labels = [], [], []
    rows = np.zeros((n_classes * per_class, dim), dtype=np.float64)
    for c, label in enumerate(names):
        for k in range(per_class):
            pos = c * per_class + k
            ids.append(f"{label}-{k:03d}")
            texts.append(f"sample {k} about {label}")
            labels.append((label,))
            rows[pos, c] = 1.0
    return _build(ids, texts, labels, rows)


def gaussian_clusters(
    n_classes: int = 3,
    per_class: int = 20,
    dim: int = 32,
    noise: float = 0.05,
    seed: int = 0,
    center_spread: float | None = None,
) -> tuple[Corpus, EmbeddingMatrix]:
    """Gaussian clusters around unit centers.

    With center_spread=None the centers are pairwise orthogonal (easy for
    plain cosine).  A small center_spread instead places every center at
    normalize(shared + center_spread * direction_i), crowding all classes
    around one shared direction: raw cosines can barely tell classes
    apart, but the classes stay linearly separable, which is exactly the
    regime where adapter training helps.
    """
    names = _label_names(n_classes)
    rng = np.random.default_rng(seed)
    if center_spread is None:
        centers = _orthonormal_frame(dim, n_classes, rng)
    else:
        frame = _orthonormal_frame(dim, n_classes + 1, rng)
        shared, directions = frame[0], frame[1:]
        centers = shared[None, :] + center_spread * directions
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    ids, texts, labels = [], [], []
    rows = np.empty((n_classes * per_class, dim), dtype=np.float64)
    for c, label in enumerate(names):
        for k in range(per_class):
            pos = c * per_class + k
            ids.append(f"{label}-{k:03d}")
            texts.append(f"sample {k} about {label}")
            labels.append((label,))
            rows[pos] = centers[c] + noise * rng.normal(size=dim)
    return _build(ids, texts, labels, rows)


def multilabel_mixtures(
    per_class: int = 20,
    n_shared: int = 4,
    dim: int = 16,
    noise: float = 0.0,
    seed: int = 0,
) -> tuple[Corpus, EmbeddingMatrix]:
    """Three classes plus sentences labeled with both of the first two.

    Single-label sentences sit on (or near) their class direction; the
    shared ones sit on the normalized sum of the first two directions, so
    "alpha and beta", "alpha without beta", and "neither" are all
    geometrically recoverable.  n_shared should stay below any exemplar
    count used downstream, otherwise an exemplar set can consist entirely
    of shared sentences and ties appear.
    """
    names = _label_names(3)
    rng = np.random.default_rng(seed)
    frame = _orthonormal_frame(dim, 3, rng)
    mix = frame[0] + frame[1]
    mix /= np.linalg.norm(mix)
    ids, texts, labels, vecs = [], [], [], []
    for c, label in enumerate(names):
        for k in range(per_class):
            ids.append(f"{label}-{k:03d}")
            texts.append(f"sample {k} about {label}")
            labels.append((label,))
            vecs.append(frame[c])
    for k in range(n_shared):
        ids.append(f"{names[0]}-{names[1]}-{k:03d}")
        texts.append(f"sample {k} about {names[0]} and {names[1]}")
        labels.append((names[0], names[1]))
        vecs.append(mix)
    rows = np.asarray(vecs, dtype=np.float64)
    if noise > 0.0:
        rows = rows + noise * rng.normal(size=rows.shape)
    return _build(ids, texts, labels, rows)


def random_unit_corpus(
    n_classes: int = 4, per_class: int = 50, dim: int = 16, seed: int = 0
) -> tuple[Corpus, EmbeddingMatrix]:
    """Labels carry no geometric signal: rows are i.i.d. random unit
    vectors.  Any protocol should land at its chance level here."""
    names = _label_names(n_classes)
    rng = np.random.default_rng(seed)
    ids, texts, labels = [], [], []
    for label in names:
        for k in range(per_class):
            ids.append(f"{label}-{k:03d}")
            texts.append(f"sample {k} about {label}")
            labels.append((label,))
    rows = rng.normal(size=(n_classes * per_class, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return _build(ids, texts, labels, rows)


def sets_by_label(corpus: Corpus) -> dict[str, SemanticSet]:
    """One semantic set per label, holding every sentence carrying it."""
    return {
        label: SemanticSet(name=label, members=tuple(ids))
        for label, ids in corpus.label_index().items()
    }
