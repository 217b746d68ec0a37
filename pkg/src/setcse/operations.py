"""Set-operation scoring and ranking over a carrier set.

A series pairs one carrier set with intersect and difference operands.
Each carrier sentence x gets

    score(x) = sum of set_similarity(x, B) over intersect operands B
             - sum of set_similarity(x, C) over difference operands C

and the carrier is returned sorted by score descending.  Intersection
alone ranks most-similar first; difference alone ranks most-dissimilar
first (its scores are negated similarities).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, RangeError
from .geometry import set_similarity_rows
from .store import EmbeddingMatrix, SemanticSet


@dataclass(frozen=True)
class OperationSeries:
    """One carrier set plus at least one intersect or difference operand."""

    carrier: SemanticSet
    intersects: tuple[SemanticSet, ...] = ()
    differences: tuple[SemanticSet, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "intersects", tuple(self.intersects))
        object.__setattr__(self, "differences", tuple(self.differences))
        if len(self.intersects) + len(self.differences) < 1:
            raise DomainError("a series needs at least one operand set")


@dataclass(frozen=True)
class RankedEntry:
    id: str
    score: float
    original_index: int


@dataclass(frozen=True)
class RankedResult:
    """Carrier members ordered by score descending, ties by carrier position."""

    carrier_name: str
    entries: tuple[RankedEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.entries)


def series_scores(series: OperationSeries, embeddings: EmbeddingMatrix) -> dict[str, float]:
    """Score every carrier sentence against the operand sets.

    Operand contributions are summed in a canonical order (sorted by set
    name, intersects before differences on name ties) independently of the
    order the series supplied them.  Float addition is not associative, so
    this canonical order is what makes operand-permuted series produce
    bit-identical scores.
    """
    carrier_rows = embeddings.rows_for(series.carrier.members)
    contributions = [(s.name, 0, 1.0, s) for s in series.intersects]
    contributions += [(s.name, 1, -1.0, s) for s in series.differences]
    contributions.sort(key=lambda c: (c[0], c[1]))

    totals = np.zeros(len(series.carrier), dtype=np.float64)
    for _, _, sign, operand in contributions:
        totals += sign * set_similarity_rows(carrier_rows, operand, embeddings)
    return {sid: float(totals[k]) for k, sid in enumerate(series.carrier.members)}


def rank_series(series: OperationSeries, embeddings: EmbeddingMatrix) -> RankedResult:
    """Order the carrier by series score, descending, stable on ties."""
    scores = series_scores(series, embeddings)
    entries = [
        RankedEntry(id=sid, score=scores[sid], original_index=k)
        for k, sid in enumerate(series.carrier.members)
    ]
    entries.sort(key=lambda e: (-e.score, e.original_index))
    return RankedResult(carrier_name=series.carrier.name, entries=tuple(entries))


def intersection(
    carrier: SemanticSet, operand: SemanticSet, embeddings: EmbeddingMatrix
) -> RankedResult:
    """Rank the carrier by similarity to the operand, most similar first."""
    return rank_series(OperationSeries(carrier=carrier, intersects=(operand,)), embeddings)


def difference(
    carrier: SemanticSet, operand: SemanticSet, embeddings: EmbeddingMatrix
) -> RankedResult:
    """Rank the carrier by dissimilarity to the operand, least similar first."""
    return rank_series(OperationSeries(carrier=carrier, differences=(operand,)), embeddings)


def top_k(result: RankedResult, k: int) -> RankedResult:
    """First k entries of a ranking.  k must be within [0, len(result)]."""
    if not (0 <= k <= len(result.entries)):
        raise RangeError(f"k={k} outside [0, {len(result.entries)}]")
    return RankedResult(carrier_name=result.carrier_name, entries=result.entries[:k])
