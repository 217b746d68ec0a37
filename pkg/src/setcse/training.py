"""Inter-set contrastive training of the embedding adapter.

The objective treats sentences from different semantic sets as negative
pairs and pushes their adapted embeddings apart:

    loss = sum over sets S_i, anchors m in S_i of
           log( sum over sampled negatives n outside S_i of
                exp( cos(h_m, h_n) / tau ) )

where h = W @ x + b is the affine adapter applied to the base embedding x.
There are no positive-pair terms.  Minimizing the loss therefore drives
cross-set cosine similarity down, sharpening set-membership contrasts.

Training is full-batch gradient descent with momentum over the adapter
parameters only; base embeddings stay frozen.  Everything is deterministic
given the config: pairs are resampled each epoch from a seed derived from
(config seed, epoch index).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, DroppedAnchorWarning, NumericError, ValidationError
from .store import AdapterCheckpoint, EmbeddingMatrix, SemanticSet


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for adapter training."""

    tau: float = 0.05
    epochs: int = 60
    learning_rate: float = 0.003
    seed: int = 0
    max_negatives_per_anchor: int | str = "all"
    momentum: float = 0.9

    def __post_init__(self) -> None:
        if not (self.tau > 0):
            raise ValidationError(f"tau must be > 0, got {self.tau}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if not (self.learning_rate > 0):
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not isinstance(self.seed, int) or not (0 <= self.seed < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        cap = self.max_negatives_per_anchor
        if cap != "all" and (not isinstance(cap, int) or cap < 1):
            raise ValidationError('max_negatives_per_anchor must be a positive integer or "all"')
        if not (0.0 <= self.momentum < 1.0):
            raise ValidationError(f"momentum must be in [0, 1), got {self.momentum}")


@dataclass(frozen=True)
class NegativePair:
    """A directed cross-set pair: anchor in anchor_set, negative outside it."""

    anchor_id: str
    negative_id: str
    anchor_set: str


@dataclass(frozen=True)
class TrainReport:
    """Outcome of a training run."""

    loss_history: tuple[float, ...]
    final_adapter: AdapterCheckpoint
    pair_count: int


@dataclass(frozen=True)
class LossGradient:
    """Loss value plus its gradient with respect to the adapter parameters."""

    loss: float
    weights: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)


def derive_epoch_seed(seed: int, epoch: int) -> np.random.SeedSequence:
    """Deterministic per-epoch sampling seed."""
    return np.random.SeedSequence(entropy=(seed, epoch))


def sample_negative_pairs(
    sets: Sequence[SemanticSet],
    cfg: TrainConfig,
    rng_seed: int | np.random.SeedSequence | None = None,
) -> list[NegativePair]:
    """Draw cross-set negative pairs for every anchor.

    For each anchor m in each set S_i, draws up to
    cfg.max_negatives_per_anchor ids uniformly without replacement from
    the union of the other sets' members, excluding any id equal to the
    anchor's.  Deterministic given rng_seed (defaults to cfg.seed).
    Anchors whose candidate pool is empty are skipped with a
    :class:`DroppedAnchorWarning` (reachable with multi-label data).
    """
    if len(sets) < 2:
        raise DomainError("negative sampling needs at least 2 sets")
    names = [s.name for s in sets]
    if len(set(names)) != len(names):
        raise ValidationError("set names must be unique for pair sampling")
    if rng_seed is None:
        rng_seed = cfg.seed
    rng = np.random.default_rng(rng_seed)
    cap = cfg.max_negatives_per_anchor

    pairs: list[NegativePair] = []
    for i, s in enumerate(sets):
        # union of the other sets' members, first occurrence wins
        pool: list[str] = []
        seen: set[str] = set()
        for j, other in enumerate(sets):
            if j == i:
                continue
            for sid in other.members:
                if sid not in seen:
                    seen.add(sid)
                    pool.append(sid)
        for anchor in s.members:
            candidates = [sid for sid in pool if sid != anchor] if anchor in seen else pool
            if not candidates:
                warnings.warn(
                    f"anchor {anchor!r} of set {s.name!r} has no eligible negatives; skipped",
                    DroppedAnchorWarning,
                    stacklevel=2,
                )
                continue
            if cap == "all" or cap >= len(candidates):
                chosen = candidates
            else:
                picks = rng.choice(len(candidates), size=cap, replace=False)
                chosen = [candidates[k] for k in picks]
            pairs.extend(NegativePair(anchor, neg, s.name) for neg in chosen)
    return pairs


def _check_tau(tau: float) -> None:
    if not (tau > 0):
        raise DomainError(f"tau must be > 0, got {tau}")


def _pair_indices(
    pairs: Sequence[NegativePair], embeddings: EmbeddingMatrix
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Row indices for anchors/negatives plus pair positions grouped by anchor.

    Groups follow first appearance order, so reductions stay in
    anchor-list order (determinism contract).
    """
    anchor_idx = np.empty(len(pairs), dtype=np.intp)
    neg_idx = np.empty(len(pairs), dtype=np.intp)
    groups: dict[tuple[str, str], list[int]] = {}
    for pos, p in enumerate(pairs):
        if p.anchor_id == p.negative_id:
            raise ValidationError(f"pair anchors itself: {p.anchor_id!r}")
        anchor_idx[pos] = embeddings.index_of(p.anchor_id)
        neg_idx[pos] = embeddings.index_of(p.negative_id)
        groups.setdefault((p.anchor_set, p.anchor_id), []).append(pos)
    slices = [np.asarray(v, dtype=np.intp) for v in groups.values()]
    return anchor_idx, neg_idx, slices


def interset_loss(pairs: Sequence[NegativePair], embeddings: EmbeddingMatrix, tau: float) -> float:
    """Inter-set contrastive loss restricted to the given pairs.

    Uses a stable log-sum-exp (per-anchor maximum subtracted), so the value
    stays finite for any finite embeddings and tau >= 1e-6 even with
    similarities at +/-1.
    """
    _check_tau(tau)
    if not pairs:
        raise DomainError("loss is undefined without negative pairs")
    anchor_idx, neg_idx, slices = _pair_indices(pairs, embeddings)
    values = embeddings.values.astype(np.float64)
    norms = np.linalg.norm(values, axis=1, keepdims=True)
    units = values / norms
    sims = np.einsum("pd,pd->p", units[anchor_idx], units[neg_idx])
    z = sims / tau
    total = 0.0
    for sl in slices:
        zg = z[sl]
        m = float(zg.max())
        total += m + math.log(float(np.exp(zg - m).sum()))
    return total


def _affine_loss_grad(
    anchor_idx: np.ndarray,
    neg_idx: np.ndarray,
    slices: list[np.ndarray],
    base: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    tau: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss and exact adapter gradient, all in float64.

    With u = W x_m + b and v = W x_n + b, each pair contributes
    cos(u, v) / tau inside its anchor's log-sum-exp.  The chain rule gives
    d cos / d u = (v_hat - cos * u_hat) / |u| (and symmetrically for v);
    the log-sum-exp turns into softmax weights over each anchor's pairs.
    Per-row gradients are accumulated and folded into the parameter
    gradient via dW = G^T X, db = column sums of G.
    """
    adapted = base @ weights.T + bias
    if not np.all(np.isfinite(adapted)):
        raise NumericError("adapter output is non-finite")
    with np.errstate(over="ignore"):
        norms = np.linalg.norm(adapted, axis=1)
    # rows can be float64-finite while their squared norms overflow; the
    # cosines would silently collapse to 0, so treat it as a failure
    if not np.all(np.isfinite(norms)):
        raise NumericError("adapted embedding norm overflowed")
    needed = np.zeros(base.shape[0], dtype=bool)
    needed[anchor_idx] = True
    needed[neg_idx] = True
    if np.any(needed & (norms == 0.0)):
        raise DomainError("adapter maps an embedding to zero norm; cosine undefined")
    safe = np.where(norms == 0.0, 1.0, norms)
    units = adapted / safe[:, None]

    sims = np.einsum("pd,pd->p", units[anchor_idx], units[neg_idx])
    z = sims / tau
    coef = np.empty_like(z)
    total = 0.0
    for sl in slices:
        zg = z[sl]
        m = float(zg.max())
        ex = np.exp(zg - m)
        denom = float(ex.sum())
        total += m + math.log(denom)
        coef[sl] = ex / (denom * tau)  # softmax weight / tau

    ua = units[anchor_idx]
    un = units[neg_idx]
    gu = coef[:, None] * (un - sims[:, None] * ua) / norms[anchor_idx][:, None]
    gv = coef[:, None] * (ua - sims[:, None] * un) / norms[neg_idx][:, None]
    row_grad = np.zeros_like(adapted)
    np.add.at(row_grad, anchor_idx, gu)
    np.add.at(row_grad, neg_idx, gv)
    weights_grad = row_grad.T @ base
    bias_grad = row_grad.sum(axis=0)
    return total, weights_grad, bias_grad


def interset_loss_grad(
    pairs: Sequence[NegativePair],
    base_embeddings: EmbeddingMatrix,
    adapter: AdapterCheckpoint,
    tau: float,
) -> LossGradient:
    """Loss and its exact gradient with respect to the adapter parameters.

    The loss is evaluated on adapted embeddings (W @ x + b) kept in
    float64 end to end; it matches central finite differences of the same
    float64 loss.
    """
    _check_tau(tau)
    if not pairs:
        raise DomainError("loss is undefined without negative pairs")
    if adapter.dim != base_embeddings.dim:
        raise ValidationError(
            f"adapter dim {adapter.dim} vs embedding dim {base_embeddings.dim}"
        )
    anchor_idx, neg_idx, slices = _pair_indices(pairs, base_embeddings)
    base = base_embeddings.values.astype(np.float64)
    loss, wg, bg = _affine_loss_grad(
        anchor_idx, neg_idx, slices, base, adapter.weights, adapter.bias, tau
    )
    return LossGradient(loss=loss, weights=wg, bias=bg)


def train_adapter(
    base_embeddings: EmbeddingMatrix,
    sets: Sequence[SemanticSet],
    cfg: TrainConfig,
) -> TrainReport:
    """Fit the affine adapter by minimizing the inter-set loss.

    Starts from the identity map (so epoch 0 scores the frozen baseline),
    resamples negative pairs each epoch from a seed derived from
    (cfg.seed, epoch), and applies full-batch gradient descent with
    momentum.  Updates use the gradient divided by the number of anchors,
    i.e. the mean per-anchor objective, so a given learning rate behaves
    the same across corpus sizes; loss_history still records the summed
    loss.  The recorded loss for an epoch is the value before that epoch's
    parameter update.
    """
    if len(sets) < 2:
        raise DomainError("training needs at least 2 semantic sets")
    for s in sets:
        base_embeddings.rows_for(s.members)  # fail fast on unresolved ids

    dim = base_embeddings.dim
    base = base_embeddings.values.astype(np.float64)
    weights = np.eye(dim, dtype=np.float64)
    bias = np.zeros(dim, dtype=np.float64)
    vel_w = np.zeros_like(weights)
    vel_b = np.zeros_like(bias)

    history: list[float] = []
    pair_count = 0
    for epoch in range(cfg.epochs):
        pairs = sample_negative_pairs(sets, cfg, derive_epoch_seed(cfg.seed, epoch))
        if not pairs:
            raise DomainError(f"epoch {epoch}: no negative pairs could be sampled")
        pair_count = len(pairs)
        anchor_idx, neg_idx, slices = _pair_indices(pairs, base_embeddings)
        try:
            loss, wg, bg = _affine_loss_grad(
                anchor_idx, neg_idx, slices, base, weights, bias, cfg.tau
            )
        except NumericError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from None
        if not math.isfinite(loss):
            raise NumericError(f"epoch {epoch}: loss is non-finite")
        history.append(loss)
        anchors = len(slices)
        vel_w = cfg.momentum * vel_w - cfg.learning_rate * (wg / anchors)
        vel_b = cfg.momentum * vel_b - cfg.learning_rate * (bg / anchors)
        weights = weights + vel_w
        bias = bias + vel_b
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise NumericError(f"epoch {epoch}: adapter parameters diverged to non-finite values")

    checkpoint = AdapterCheckpoint(
        dim=dim,
        weights=weights,
        bias=bias,
        metadata={
            "tau": cfg.tau,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "seed": cfg.seed,
            "momentum": cfg.momentum,
            "max_negatives_per_anchor": cfg.max_negatives_per_anchor,
        },
    )
    return TrainReport(
        loss_history=tuple(history), final_adapter=checkpoint, pair_count=pair_count
    )
