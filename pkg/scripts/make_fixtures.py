"""Regenerate the synthetic fixtures checked in under tests/data/.

Every fixture is deterministic. Rerunning this script must reproduce the
committed files byte for byte; tests/test_acceptance.py relies on that.
"""

from __future__ import annotations

import json
from pathlib import Path

from setcse import Corpus, EmbeddingMatrix, write_embeddings
from setcse.synthetic import (
    gaussian_clusters,
    multilabel_mixtures,
    orthogonal_clusters,
    random_unit_corpus,
    sets_by_label,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"


def write_corpus(path: Path, corpus: Corpus) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for s in corpus:
            label = s.labels[0] if len(s.labels) == 1 else list(s.labels)
            fh.write(json.dumps({"id": s.id, "text": s.text, "label": label}) + "\n")


def write_sets(path: Path, corpus: Corpus) -> None:
    groups = {name: list(sset.members) for name, sset in sets_by_label(corpus).items()}
    path.write_text(json.dumps(groups, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def emit(name: str, corpus: Corpus, emb: EmbeddingMatrix, with_sets: bool = False) -> None:
    write_corpus(DATA_DIR / f"{name}.corpus.jsonl", corpus)
    write_embeddings(DATA_DIR / f"{name}.scse", emb)
    if with_sets:
        write_sets(DATA_DIR / f"{name}.sets.json", corpus)
    print(f"{name}: {len(corpus)} sentences, dim {emb.dim}")


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)

    # Noiseless one-hot clusters. Single-protocol sanity checks expect
    # exact accuracy 1.0 here in both arms.
    emit("ortho3", *orthogonal_clusters(n_classes=3, per_class=30, dim=16), with_sets=True)

    # Noiseless clusters plus a handful of two-label blend sentences so the
    # serial protocols have a nonempty both-label target at any split.
    emit("mix3", *multilabel_mixtures(per_class=20, n_shared=4, dim=16, noise=0.0, seed=7))

    # Correlated cluster centers with mild noise. Frozen cosine ranking is
    # mediocre here but the classes stay linearly separable, leaving room
    # for adapter training to improve held-out accuracy.
    emit(
        "gauss3",
        *gaussian_clusters(n_classes=3, per_class=20, dim=32, noise=0.05, seed=1, center_spread=0.08),
        with_sets=True,
    )

    # Bigger noisy clusters (40 per class) so n_sample can sweep up to 20
    # while every class still splits.
    emit("noisy3x40", *gaussian_clusters(n_classes=3, per_class=40, dim=16, noise=0.3, seed=1))

    # Labels assigned to i.i.d. random directions; any ranking protocol can
    # only hit chance level on this one.
    emit("rand4", *random_unit_corpus(n_classes=4, per_class=50, dim=16, seed=3))


if __name__ == "__main__":
    main()
