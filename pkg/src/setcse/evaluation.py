"""Evaluation protocols for set-operation querying on labeled corpora.

Each protocol splits every class into a small exemplar set Q_i plus a
shared evaluation pool U, optionally trains the adapter on the exemplar
sets, ranks U against the exemplars, selects a count-matched top slice,
and scores the selection against the labels:

- intersection: U & Q_i per class, top (class size - n_sample), predict
  class i for the selected sentences.
- difference: U \\ Q_i per class, top (everything outside class i),
  predict "not i"; scored as the induced binary task.
- serial protocols: two exemplar sets at once (both / neither / first
  without second), selection counts matched to the multi-label ground
  truth.

Accuracy is the fraction of selected sentences whose labels match the
prediction, pooled over classes and repeats.  F1 is macro-averaged and
then averaged over repeats.  Runs are deterministic given the config:
repeat r uses seed + r for both the split and the training.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, UnknownNameError, ValidationError
from .geometry import apply_adapter
from .operations import OperationSeries, rank_series, top_k
from .store import Corpus, EmbeddingMatrix, SemanticSet
from .training import TrainConfig, train_adapter

ARM_SETCSE = "setcse"
ARM_FROZEN = "frozen"


@dataclass(frozen=True)
class EvalConfig:
    """Protocol settings.  train=True is the adapter-trained arm."""

    n_sample: int = 20
    tau: float = 0.05
    epochs: int = 60
    repeats: int = 5
    seed: int = 0
    train: bool = True
    learning_rate: float = 0.003
    momentum: float = 0.9
    max_negatives_per_anchor: int | str = "all"

    def __post_init__(self) -> None:
        if self.n_sample < 1:
            raise ValidationError(f"n_sample must be >= 1, got {self.n_sample}")
        if self.repeats < 1:
            raise ValidationError(f"repeats must be >= 1, got {self.repeats}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")

    @property
    def arm(self) -> str:
        return ARM_SETCSE if self.train else ARM_FROZEN


@dataclass(frozen=True)
class EvalReport:
    """Aggregated metrics for one protocol run."""

    accuracy: float
    f1: float
    per_class: dict[str, tuple[int, int]]
    arm: str
    protocol: str = ""
    repeat_accuracies: tuple[float, ...] = ()
    repeat_f1s: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValidationError(f"accuracy {self.accuracy} outside [0, 1]")
        if not (0.0 <= self.f1 <= 1.0):
            raise ValidationError(f"f1 {self.f1} outside [0, 1]")
        total_sel = sum(sel for sel, _ in self.per_class.values())
        total_cor = sum(cor for _, cor in self.per_class.values())
        if total_sel and abs(self.accuracy - total_cor / total_sel) > 1e-9:
            raise ValidationError("accuracy disagrees with per_class totals")


def split_examples(
    corpus: Corpus, n_sample: int, seed: int | np.random.SeedSequence
) -> tuple[list[SemanticSet], SemanticSet]:
    """Per class, sample n_sample exemplar ids; pool the rest into U.

    Classes are the distinct labels, processed in sorted order with a
    single generator, so the split is deterministic given the seed.  Every
    class must have more than n_sample members (otherwise a
    :class:`DomainError` naming the class).  Sentences sampled into any
    exemplar set are withheld from U; unlabeled sentences never enter U.
    """
    if n_sample < 1:
        raise DomainError(f"n_sample must be >= 1, got {n_sample}")
    by_label = corpus.label_index()
    if not by_label:
        raise DomainError("corpus has no labeled sentences")
    rng = np.random.default_rng(seed)
    exemplar_sets: list[SemanticSet] = []
    selected: set[str] = set()
    for label in sorted(by_label):
        ids = by_label[label]
        if len(ids) <= n_sample:
            raise DomainError(
                f"class {label!r} has {len(ids)} members; n_sample={n_sample} requires more"
            )
        picks = rng.choice(len(ids), size=n_sample, replace=False)
        members = tuple(ids[k] for k in sorted(picks))
        exemplar_sets.append(SemanticSet(name=label, members=members))
        selected.update(members)
    pool = tuple(s.id for s in corpus if s.labels and s.id not in selected)
    if not pool:
        raise DomainError("no labeled sentences left for the evaluation pool")
    return exemplar_sets, SemanticSet(name="U", members=pool)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _binary_macro_f1(k: int, correct: int, pos_total: int, pool_size: int) -> float:
    """Macro F1 of the binary task: top-k predicted positive, rest negative."""
    scores: list[float] = []
    if pos_total > 0 or k > 0:
        p = correct / k if k else 0.0
        r = correct / pos_total if pos_total else 0.0
        scores.append(_f1(p, r))
    pred_neg = pool_size - k
    neg_total = pool_size - pos_total
    if neg_total > 0 or pred_neg > 0:
        tp_neg = pred_neg - (pos_total - correct)
        p = tp_neg / pred_neg if pred_neg else 0.0
        r = tp_neg / neg_total if neg_total else 0.0
        scores.append(_f1(p, r))
    return sum(scores) / len(scores) if scores else 0.0


def _train_config(cfg: EvalConfig, seed: int) -> TrainConfig:
    return TrainConfig(
        tau=cfg.tau,
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        seed=seed,
        max_negatives_per_anchor=cfg.max_negatives_per_anchor,
        momentum=cfg.momentum,
    )


def _prepare_repeat(
    corpus: Corpus, embeddings: EmbeddingMatrix, cfg: EvalConfig, repeat: int
) -> tuple[dict[str, SemanticSet], SemanticSet, EmbeddingMatrix]:
    """Split and (for the trained arm) fit the adapter for one repeat.

    Training happens once per repeat over all exemplar sets jointly; the
    loss is defined across every set, not per queried class.
    """
    seed = cfg.seed + repeat
    exemplar_sets, pool = split_examples(corpus, cfg.n_sample, seed)
    if cfg.train and cfg.epochs >= 1:
        report = train_adapter(embeddings, exemplar_sets, _train_config(cfg, seed))
        scored = apply_adapter(report.final_adapter, embeddings)
    else:
        scored = embeddings
    return {s.name: s for s in exemplar_sets}, pool, scored


def _merge_counts(
    sink: dict[str, list[int]], key: str, selected: int, correct: int
) -> None:
    cell = sink.setdefault(key, [0, 0])
    cell[0] += selected
    cell[1] += correct


def _finish_report(
    protocol: str,
    cfg: EvalConfig,
    counts: dict[str, list[int]],
    repeat_accs: list[float],
    repeat_f1s: list[float],
) -> EvalReport:
    total_sel = sum(v[0] for v in counts.values())
    total_cor = sum(v[1] for v in counts.values())
    return EvalReport(
        accuracy=total_cor / total_sel if total_sel else 0.0,
        f1=sum(repeat_f1s) / len(repeat_f1s),
        per_class={k: (v[0], v[1]) for k, v in counts.items()},
        arm=cfg.arm,
        protocol=protocol,
        repeat_accuracies=tuple(repeat_accs),
        repeat_f1s=tuple(repeat_f1s),
    )


def eval_intersection(corpus: Corpus, embeddings: EmbeddingMatrix, cfg: EvalConfig) -> EvalReport:
    """Per class: rank U & Q_i, select top (class size - n_sample), predict i.

    Each class's selection is scored independently; a sentence may be
    selected for several classes and contributes to each.  Accuracy pools
    correct selections over classes and repeats; F1 is the macro average
    of per-class precision/recall, averaged over repeats.
    """
    class_sizes = {label: len(ids) for label, ids in corpus.label_index().items()}
    counts: dict[str, list[int]] = {}
    repeat_accs: list[float] = []
    repeat_f1s: list[float] = []
    for repeat in range(cfg.repeats):
        exemplars, pool, scored = _prepare_repeat(corpus, embeddings, cfg, repeat)
        pool_label_counts = {
            label: sum(1 for sid in pool.members if label in corpus.by_id(sid).labels)
            for label in exemplars
        }
        rep_sel = rep_cor = 0
        f1s: list[float] = []
        for label in sorted(exemplars):
            k = class_sizes[label] - cfg.n_sample
            series = OperationSeries(carrier=pool, intersects=(exemplars[label],))
            chosen = top_k(rank_series(series, scored), k).entries
            correct = sum(1 for e in chosen if label in corpus.by_id(e.id).labels)
            _merge_counts(counts, label, k, correct)
            rep_sel += k
            rep_cor += correct
            precision = correct / k if k else 0.0
            in_pool = pool_label_counts[label]
            recall = correct / in_pool if in_pool else 0.0
            f1s.append(_f1(precision, recall))
        repeat_accs.append(rep_cor / rep_sel if rep_sel else 0.0)
        repeat_f1s.append(sum(f1s) / len(f1s))
    return _finish_report("intersection", cfg, counts, repeat_accs, repeat_f1s)


def eval_difference(corpus: Corpus, embeddings: EmbeddingMatrix, cfg: EvalConfig) -> EvalReport:
    """Per class: rank U \\ Q_i, select everything that should sit outside i.

    The selection count is the total non-i remainder; selected sentences
    are predicted "not i".  Accuracy is the fraction of selections truly
    outside class i; F1 is the macro F1 of the induced binary task (the
    unselected remainder is implicitly predicted "i"), averaged over
    classes and repeats.
    """
    class_sizes = {label: len(ids) for label, ids in corpus.label_index().items()}
    counts: dict[str, list[int]] = {}
    repeat_accs: list[float] = []
    repeat_f1s: list[float] = []
    for repeat in range(cfg.repeats):
        exemplars, pool, scored = _prepare_repeat(corpus, embeddings, cfg, repeat)
        rep_sel = rep_cor = 0
        f1s: list[float] = []
        for label in sorted(exemplars):
            k = sum(class_sizes[other] - cfg.n_sample for other in exemplars if other != label)
            series = OperationSeries(carrier=pool, differences=(exemplars[label],))
            chosen = top_k(rank_series(series, scored), k).entries
            correct = sum(1 for e in chosen if label not in corpus.by_id(e.id).labels)
            _merge_counts(counts, f"not-{label}", k, correct)
            rep_sel += k
            rep_cor += correct
            pos_total = sum(
                1 for sid in pool.members if label not in corpus.by_id(sid).labels
            )
            f1s.append(_binary_macro_f1(k, correct, pos_total, len(pool)))
        repeat_accs.append(rep_cor / rep_sel if rep_sel else 0.0)
        repeat_f1s.append(sum(f1s) / len(f1s))
    return _finish_report("difference", cfg, counts, repeat_accs, repeat_f1s)


def _serial_eval(
    protocol: str,
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    classes: tuple[str, str],
    cfg: EvalConfig,
    wants_first: bool,
    wants_second: bool,
) -> EvalReport:
    """Shared engine for the two-set protocols.

    wants_first/wants_second state whether the target sentences carry each
    label.  The series intersects the exemplar set of a wanted label and
    subtracts the exemplar set of an unwanted one; the selection count is
    the number of pool sentences whose labels match the wanted pattern.
    """
    first, second = classes
    by_label = corpus.label_index()
    for label in classes:
        if label not in by_label:
            raise UnknownNameError(f"unknown class label {label!r}")
    if first == second:
        raise DomainError("serial protocols need two distinct class labels")

    def matches(sid: str) -> bool:
        labels = corpus.by_id(sid).labels
        return (first in labels) == wants_first and (second in labels) == wants_second

    counts: dict[str, list[int]] = {}
    repeat_accs: list[float] = []
    repeat_f1s: list[float] = []
    key = f"{first if wants_first else 'not-' + first}&{second if wants_second else 'not-' + second}"
    for repeat in range(cfg.repeats):
        exemplars, pool, scored = _prepare_repeat(corpus, embeddings, cfg, repeat)
        k = sum(1 for sid in pool.members if matches(sid))
        if k == 0:
            raise DomainError(
                f"evaluation pool has no sentences matching {key!r} (repeat {repeat})"
            )
        intersects = tuple(exemplars[c] for c, want in ((first, wants_first), (second, wants_second)) if want)
        differences = tuple(exemplars[c] for c, want in ((first, wants_first), (second, wants_second)) if not want)
        series = OperationSeries(carrier=pool, intersects=intersects, differences=differences)
        chosen = top_k(rank_series(series, scored), k).entries
        correct = sum(1 for e in chosen if matches(e.id))
        _merge_counts(counts, key, k, correct)
        repeat_accs.append(correct / k)
        repeat_f1s.append(_binary_macro_f1(k, correct, k, len(pool)))
    return _finish_report(protocol, cfg, counts, repeat_accs, repeat_f1s)


def eval_serial_intersection(
    corpus: Corpus, embeddings: EmbeddingMatrix, classes: tuple[str, str], cfg: EvalConfig
) -> EvalReport:
    """U & Q_i & Q_j: select the sentences carrying both labels."""
    return _serial_eval(
        "serial-intersection", corpus, embeddings, classes, cfg, True, True
    )


def eval_serial_difference(
    corpus: Corpus, embeddings: EmbeddingMatrix, classes: tuple[str, str], cfg: EvalConfig
) -> EvalReport:
    """U \\ Q_i \\ Q_j: select the sentences carrying neither label."""
    return _serial_eval(
        "serial-difference", corpus, embeddings, classes, cfg, False, False
    )


def eval_serial_mixed(
    corpus: Corpus, embeddings: EmbeddingMatrix, classes: tuple[str, str], cfg: EvalConfig
) -> EvalReport:
    """U & Q_i \\ Q_j: select the sentences carrying the first label only."""
    return _serial_eval("serial-mixed", corpus, embeddings, classes, cfg, True, False)


def sweep_n_sample(
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    values: Sequence[int],
    cfg: EvalConfig,
) -> list[tuple[int, EvalReport, EvalReport]]:
    """Intersection and difference protocols across exemplar-count values.

    All values share the same base seed, so repeat r of every value uses
    the same derived seed and differs only in how many exemplars are
    sampled.
    """
    if not values:
        raise DomainError("sweep needs at least one n_sample value")
    sizes = corpus.label_index()
    if not sizes:
        raise DomainError("corpus has no labeled sentences")
    smallest = min(len(ids) for ids in sizes.values())
    if max(values) >= smallest:
        raise DomainError(
            f"max n_sample {max(values)} must be below the smallest class size {smallest}"
        )
    out: list[tuple[int, EvalReport, EvalReport]] = []
    for v in values:
        cfg_v = replace(cfg, n_sample=v)
        out.append(
            (
                v,
                eval_intersection(corpus, embeddings, cfg_v),
                eval_difference(corpus, embeddings, cfg_v),
            )
        )
    return out


def report_to_dict(report: EvalReport) -> dict:
    return {
        "protocol": report.protocol,
        "arm": report.arm,
        "accuracy": report.accuracy,
        "f1": report.f1,
        "per_class": {k: {"selected": s, "correct": c} for k, (s, c) in report.per_class.items()},
        "repeat_accuracies": list(report.repeat_accuracies),
        "repeat_f1s": list(report.repeat_f1s),
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True)


def reports_to_table(reports: Iterable[EvalReport]) -> str:
    """Aligned-column text table of protocol/arm/accuracy/F1."""
    rows = [("protocol", "arm", "accuracy", "f1")]
    for r in reports:
        rows.append((r.protocol or "-", r.arm, f"{r.accuracy:.4f}", f"{r.f1:.4f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines)


def sweep_to_csv(rows: Sequence[tuple[int, EvalReport, EvalReport]]) -> str:
    """One CSV row per n_sample value."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "n_sample",
            "intersection_accuracy",
            "intersection_f1",
            "difference_accuracy",
            "difference_f1",
        ]
    )
    for n, inter, diff in rows:
        writer.writerow(
            [n, f"{inter.accuracy:.6f}", f"{inter.f1:.6f}", f"{diff.accuracy:.6f}", f"{diff.f1:.6f}"]
        )
    return buf.getvalue()
