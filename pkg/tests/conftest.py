from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from setcse import Corpus, EmbeddingMatrix, load_corpus, load_sets, read_embeddings

DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def load_fixture(name: str) -> tuple[Corpus, EmbeddingMatrix]:
    corpus = load_corpus(DATA_DIR / f"{name}.corpus.jsonl")
    emb = read_embeddings(DATA_DIR / f"{name}.scse")
    return corpus, emb


def load_fixture_sets(name: str, corpus: Corpus):
    return load_sets(DATA_DIR / f"{name}.sets.json", corpus)


@pytest.fixture(scope="session")
def ortho3():
    return load_fixture("ortho3")


@pytest.fixture(scope="session")
def mix3():
    return load_fixture("mix3")


@pytest.fixture(scope="session")
def gauss3():
    return load_fixture("gauss3")


@pytest.fixture(scope="session")
def noisy3x40():
    return load_fixture("noisy3x40")


@pytest.fixture(scope="session")
def rand4():
    return load_fixture("rand4")


def matrix_from(rows: dict[str, list[float]]) -> EmbeddingMatrix:
    ids = list(rows)
    return EmbeddingMatrix(ids, np.array([rows[i] for i in ids], dtype=np.float32))
