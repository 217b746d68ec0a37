"""Similarity kernels over embedding rows.

All accumulation happens in 64-bit floats; float32 appears only at the
storage boundary (inside :class:`~setcse.store.EmbeddingMatrix`).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DomainError, NumericError, ShapeError
from .store import AdapterCheckpoint, EmbeddingMatrix, SemanticSet

# cosine of two finite vectors can exceed 1 only through rounding
COSINE_SLACK = 1e-6


def cosine_sim(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity of two vectors.

    Raises :class:`ShapeError` on mismatched dims and :class:`DomainError`
    when either vector has zero norm.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1:
        raise ShapeError("cosine_sim expects 1-d vectors")
    if av.shape[0] != bv.shape[0]:
        raise ShapeError(f"dim mismatch: {av.shape[0]} vs {bv.shape[0]}")
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine similarity is undefined for zero-norm vectors")
    return float(np.dot(av, bv) / (na * nb))


def unit_rows(values: np.ndarray) -> np.ndarray:
    """Return float64 rows scaled to unit norm.  Rows must be nonzero."""
    v = np.asarray(values, dtype=np.float64)
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    if v.shape[0] and not np.all(norms > 0.0):
        raise DomainError("cannot normalize zero-norm rows")
    return v / norms


def set_similarity(
    x: Sequence[float] | np.ndarray,
    s: SemanticSet,
    embeddings: EmbeddingMatrix,
) -> float:
    """Mean cosine similarity between a vector and every member of a set.

    Members contribute in the set's member-list order, which keeps the
    accumulated sum reproducible.  Empty sets cannot be constructed, but a
    defensive :class:`DomainError` guards the division anyway.
    """
    if len(s) == 0:
        raise DomainError(f"set {s.name!r} has no members")
    xv = np.asarray(x, dtype=np.float64)
    if xv.ndim != 1:
        raise ShapeError("set_similarity expects a 1-d vector")
    if xv.shape[0] != embeddings.dim:
        raise ShapeError(f"dim mismatch: vector {xv.shape[0]} vs embeddings {embeddings.dim}")
    nx = float(np.linalg.norm(xv))
    if nx == 0.0:
        raise DomainError("cosine similarity is undefined for zero-norm vectors")
    xu = xv / nx
    member_units = unit_rows(embeddings.rows_for(s.members))
    total = 0.0
    for k in range(member_units.shape[0]):
        total += float(np.dot(xu, member_units[k]))
    return total / len(s)


def set_similarity_rows(
    rows: np.ndarray,
    s: SemanticSet,
    embeddings: EmbeddingMatrix,
) -> np.ndarray:
    """Vector of set_similarity values for a block of rows at once.

    Same member-order accumulation as :func:`set_similarity`, vectorized
    across the query rows.
    """
    if len(s) == 0:
        raise DomainError(f"set {s.name!r} has no members")
    q = np.asarray(rows, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != embeddings.dim:
        raise ShapeError("row block does not match embedding dim")
    qu = unit_rows(q)
    member_units = unit_rows(embeddings.rows_for(s.members))
    total = np.zeros(q.shape[0], dtype=np.float64)
    for k in range(member_units.shape[0]):
        total += qu @ member_units[k]
    return total / len(s)


def apply_adapter(adapter: AdapterCheckpoint, embeddings: EmbeddingMatrix) -> EmbeddingMatrix:
    """Map every row through the affine adapter: row -> W @ row + b.

    Computes in float64, narrows back to float32 for storage, and raises
    :class:`NumericError` if any output row is non-finite (or collapses to
    zero norm, which downstream cosines cannot use).
    """
    if adapter.dim != embeddings.dim:
        raise ShapeError(f"adapter dim {adapter.dim} vs embedding dim {embeddings.dim}")
    out64 = embeddings.values.astype(np.float64) @ adapter.weights.T + adapter.bias
    with np.errstate(over="ignore"):
        out32 = out64.astype(np.float32)
    # check the narrowed values: a float64-finite row can still overflow float32
    if not np.all(np.isfinite(out32)):
        bad = int(np.argwhere(~np.isfinite(out32).all(axis=1))[0][0])
        raise NumericError(f"adapter output for id {embeddings.ids[bad]!r} is non-finite")
    norms = np.linalg.norm(out32.astype(np.float64), axis=1)
    if out32.shape[0] and not np.all(norms > 0.0):
        bad = int(np.argmin(norms))
        raise NumericError(f"adapter output for id {embeddings.ids[bad]!r} has zero norm")
    return EmbeddingMatrix(embeddings.ids, out32)
