"""Export pipeline: JSONL corpus in, SCSE embedding file out.

The binary layout is the consumer's documented external format: magic
``SCSE``, version u32 LE = 1, dim u32 LE, count u64 LE, then one record
per sentence of id length (u16 LE), UTF-8 id bytes, and dim float32 LE
values, in corpus order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import Encoder, ModelLoadError, load_encoder

_MAGIC = b"SCSE"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_ID_LEN = struct.Struct("<H")


class ExportError(Exception):
    """Anything that invalidates the export (bad corpus, bad output)."""


class EmptyCorpusError(ExportError):
    pass


@dataclass(frozen=True)
class ExportJob:
    model_id: str
    corpus_path: str | Path
    output_path: str | Path
    batch_size: int = 64
    normalize: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ExportError(f"batch size must be >= 1, got {self.batch_size}")


def read_corpus_jsonl(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs in file order.  Blank lines are skipped."""
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ExportError(f"line {lineno}: expected a JSON object")
            sid, text = obj.get("id"), obj.get("text")
            if not isinstance(sid, str) or not sid:
                raise ExportError(f'line {lineno}: "id" must be a non-empty string')
            if not isinstance(text, str):
                raise ExportError(f'line {lineno}: "text" must be a string')
            if sid in seen:
                raise ExportError(f"line {lineno}: duplicate sentence id {sid!r}")
            seen.add(sid)
            entries.append((sid, text))
    if not entries:
        raise EmptyCorpusError(f"corpus {path} has no sentences")
    return entries


def _write_scse(path: str | Path, ids: list[str], rows: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, rows.shape[1], len(ids)))
        for sid, row in zip(ids, rows):
            raw = sid.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ExportError(f"sentence id {sid!r} exceeds 65535 UTF-8 bytes")
            fh.write(_ID_LEN.pack(len(raw)))
            fh.write(raw)
            fh.write(row.astype("<f4").tobytes())


def export_embeddings(job: ExportJob, encoder: Encoder | None = None) -> int:
    """Encode the corpus and write the embedding file.  Returns the row count."""
    if encoder is None:
        encoder = load_encoder(job.model_id)
    entries = read_corpus_jsonl(job.corpus_path)
    ids = [sid for sid, _ in entries]
    chunks: list[np.ndarray] = []
    for start in range(0, len(entries), job.batch_size):
        batch = [text for _, text in entries[start : start + job.batch_size]]
        out = np.asarray(encoder.encode_batch(batch), dtype=np.float64)
        if out.shape != (len(batch), encoder.dim):
            raise ExportError(
                f"encoder returned shape {out.shape}, expected ({len(batch)}, {encoder.dim})"
            )
        chunks.append(out)
    rows = np.concatenate(chunks, axis=0)
    if not np.all(np.isfinite(rows)):
        raise ExportError("encoder produced non-finite values")
    if job.normalize:
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ExportError("cannot normalize a zero-norm embedding row")
        rows = rows / norms
    _write_scse(job.output_path, ids, rows)
    return len(ids)
