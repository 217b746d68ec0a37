"""Data types and on-disk formats.

Holds the corpus (JSONL), embedding matrices (a small binary format),
semantic set definitions (JSON) and adapter checkpoints (JSON).  Loaders
validate on the way in; loaded artifacts are treated as immutable.

Embedding file layout, all integers little-endian:

    magic     4 bytes  b"SCSE"
    version   u32      currently 1
    dim       u32
    count     u64
    records   count times: id_len u16, id bytes (UTF-8), dim float32
"""

from __future__ import annotations

import json
import struct
import unicodedata
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    CorpusParseError,
    FormatError,
    SetOverlapWarning,
    TruncationError,
    UnknownNameError,
    ValidationError,
)

_MAGIC = b"SCSE"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_ID_LEN = struct.Struct("<H")


def _is_control(ch: str) -> bool:
    return unicodedata.category(ch) == "Cc"


@dataclass(frozen=True)
class Sentence:
    """One corpus entry: a stable id, its text, and optional class labels."""

    id: str
    text: str
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("sentence id must be non-empty")
        if any(_is_control(ch) for ch in self.id):
            raise ValidationError(f"sentence id {self.id!r} contains control characters")
        for lb in self.labels:
            if not lb:
                raise ValidationError(f"sentence {self.id!r} has an empty label")


class Corpus:
    """An ordered collection of sentences with unique ids."""

    def __init__(self, sentences: Sequence[Sentence]):
        self._sentences: tuple[Sentence, ...] = tuple(sentences)
        index: dict[str, int] = {}
        for pos, s in enumerate(self._sentences):
            if s.id in index:
                raise ValidationError(f"duplicate sentence id {s.id!r}")
            index[s.id] = pos
        self._index = index

    def __len__(self) -> int:
        return len(self._sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self._sentences)

    def __getitem__(self, pos: int) -> Sentence:
        return self._sentences[pos]

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self._index

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        return self._sentences

    def by_id(self, sentence_id: str) -> Sentence:
        try:
            return self._sentences[self._index[sentence_id]]
        except KeyError:
            raise UnknownNameError(f"unknown sentence id {sentence_id!r}") from None

    def label_index(self) -> dict[str, list[str]]:
        """Map each label to the ids carrying it, in corpus order."""
        out: dict[str, list[str]] = {}
        for s in self._sentences:
            for lb in s.labels:
                out.setdefault(lb, []).append(s.id)
        return out


class EmbeddingMatrix:
    """Row-per-sentence float32 matrix keyed by sentence id.

    Invariants enforced on construction: one row per id, ids unique,
    every value finite, every row has nonzero norm, dim >= 1.  The value
    buffer is frozen so shared instances stay safe to read concurrently.
    """

    def __init__(self, ids: Sequence[str], values: np.ndarray):
        ids = tuple(ids)
        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 2:
            raise ValidationError(f"embedding values must be 2-d, got {values.ndim}-d")
        if values.shape[0] != len(ids):
            raise ValidationError(
                f"row count {values.shape[0]} does not match id count {len(ids)}"
            )
        if values.shape[1] < 1:
            raise ValidationError("embedding dim must be >= 1")
        index: dict[str, int] = {}
        for pos, sid in enumerate(ids):
            if not sid:
                raise ValidationError("embedding id must be non-empty")
            if sid in index:
                raise ValidationError(f"duplicate embedding id {sid!r}")
            index[sid] = pos
        if not np.all(np.isfinite(values)):
            raise ValidationError("embedding values must all be finite")
        norms = np.linalg.norm(values.astype(np.float64), axis=1)
        if values.shape[0] and not np.all(norms > 0.0):
            bad = ids[int(np.argmin(norms))]
            raise ValidationError(f"embedding row {bad!r} has zero norm")
        values = values.copy()
        values.setflags(write=False)
        self._ids = ids
        self._values = values
        self._index = index

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.shape[1])

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self._index

    def index_of(self, sentence_id: str) -> int:
        try:
            return self._index[sentence_id]
        except KeyError:
            raise UnknownNameError(f"no embedding for id {sentence_id!r}") from None

    def row(self, sentence_id: str) -> np.ndarray:
        return self._values[self.index_of(sentence_id)]

    def rows_for(self, ids: Sequence[str]) -> np.ndarray:
        try:
            sel = [self._index[sid] for sid in ids]
        except KeyError as exc:
            raise UnknownNameError(f"no embedding for id {exc.args[0]!r}") from None
        return self._values[sel]


@dataclass(frozen=True)
class SemanticSet:
    """A named, ordered list of sentence ids expressing one semantic."""

    name: str
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("set name must be non-empty")
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValidationError(f"set {self.name!r} has no members")
        seen: set[str] = set()
        for sid in self.members:
            if sid in seen:
                raise ValidationError(f"set {self.name!r} repeats member {sid!r}")
            seen.add(sid)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class AdapterCheckpoint:
    """A trained affine map over embeddings: row -> weights @ row + bias."""

    dim: int
    weights: np.ndarray
    bias: np.ndarray
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValidationError("adapter dim must be >= 1")
        weights = np.asarray(self.weights, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if weights.shape != (self.dim, self.dim):
            raise ValidationError(
                f"adapter weights must be {self.dim}x{self.dim}, got {weights.shape}"
            )
        if bias.shape != (self.dim,):
            raise ValidationError(f"adapter bias must have length {self.dim}, got {bias.shape}")
        if not np.all(np.isfinite(weights)) or not np.all(np.isfinite(bias)):
            raise ValidationError("adapter parameters must all be finite")
        if not isinstance(self.metadata, Mapping):
            raise ValidationError("adapter metadata must be a mapping")
        weights = weights.copy()
        bias = bias.copy()
        weights.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @classmethod
    def identity(cls, dim: int, metadata: Mapping[str, object] | None = None) -> "AdapterCheckpoint":
        return cls(
            dim=dim,
            weights=np.eye(dim, dtype=np.float64),
            bias=np.zeros(dim, dtype=np.float64),
            metadata=dict(metadata or {}),
        )


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus: one object per line with "id", "text", optional "label".

    "label" may be a single string or a list of strings.  Blank lines are
    skipped.  Raises :class:`CorpusParseError` (with the 1-based line
    number) for malformed lines and :class:`ValidationError` for duplicate
    ids, naming the id and the line it reappears on.
    """
    sentences: list[Sentence] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(f"invalid JSON ({exc.msg})", line=lineno) from None
            if not isinstance(obj, dict):
                raise CorpusParseError("expected a JSON object", line=lineno)
            if "id" not in obj or "text" not in obj:
                raise CorpusParseError('missing required field "id" or "text"', line=lineno)
            sid, text = obj["id"], obj["text"]
            if not isinstance(sid, str) or not isinstance(text, str):
                raise CorpusParseError('"id" and "text" must be strings', line=lineno)
            labels = obj.get("label")
            if labels is None:
                labels = ()
            elif isinstance(labels, str):
                labels = (labels,)
            elif isinstance(labels, list) and all(isinstance(lb, str) for lb in labels):
                labels = tuple(labels)
            else:
                raise CorpusParseError('"label" must be a string or list of strings', line=lineno)
            if sid in seen:
                raise ValidationError(
                    f"duplicate sentence id {sid!r} on line {lineno} (first seen on line {seen[sid]})"
                )
            seen[sid] = lineno
            try:
                sentences.append(Sentence(id=sid, text=text, labels=labels))
            except ValidationError as exc:
                raise CorpusParseError(str(exc), line=lineno) from None
    return Corpus(sentences)


def write_embeddings(path: str | Path, matrix: EmbeddingMatrix) -> None:
    """Serialize a matrix to the binary embedding format (see module docstring)."""
    encoded_ids = []
    for sid in matrix.ids:
        raw = sid.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError(f"id {sid[:32]!r}... exceeds the 65535-byte limit")
        encoded_ids.append(raw)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, matrix.dim, len(matrix)))
        for raw, row in zip(encoded_ids, matrix.values):
            fh.write(_ID_LEN.pack(len(raw)))
            fh.write(raw)
            fh.write(row.tobytes())


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read a binary embedding file, validating structure and content.

    Wrong magic or unsupported version raises :class:`FormatError`; a
    payload that ends early or disagrees with the declared count raises
    :class:`TruncationError`.  Round-trips written files bit-exactly.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise TruncationError(f"file too short for header ({len(data)} bytes)")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported format version {version}")
    if dim < 1:
        raise FormatError(f"declared dim {dim} must be >= 1")
    offset = _HEADER.size
    row_bytes = 4 * dim
    ids: list[str] = []
    rows = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        if offset + _ID_LEN.size > len(data):
            raise TruncationError(f"record {i}: file ends inside id length")
        (id_len,) = _ID_LEN.unpack_from(data, offset)
        offset += _ID_LEN.size
        if offset + id_len + row_bytes > len(data):
            raise TruncationError(
                f"record {i}: declared count {count} exceeds available payload"
            )
        try:
            ids.append(data[offset : offset + id_len].decode("utf-8"))
        except UnicodeDecodeError:
            raise FormatError(f"record {i}: id bytes are not valid UTF-8") from None
        offset += id_len
        rows[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += row_bytes
    if offset != len(data):
        raise TruncationError(f"{len(data) - offset} trailing bytes after {count} records")
    return EmbeddingMatrix(ids, rows)


def load_sets(path: str | Path, corpus: Corpus) -> dict[str, SemanticSet]:
    """Read set definitions: a JSON object mapping set name -> list of ids.

    Every member id must resolve in the corpus (otherwise
    :class:`UnknownNameError` naming the set and the id).  Overlapping
    sets are permitted but announced with :class:`SetOverlapWarning`.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"set file is not valid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise FormatError("set file must be a JSON object of name -> id list")
    sets: dict[str, SemanticSet] = {}
    claimed: dict[str, str] = {}
    overlaps: list[str] = []
    for name, members in obj.items():
        if not isinstance(members, list) or not all(isinstance(m, str) for m in members):
            raise FormatError(f"set {name!r} must map to a list of id strings")
        for sid in members:
            if sid not in corpus:
                raise UnknownNameError(f"set {name!r} references unknown sentence id {sid!r}")
        sets[name] = SemanticSet(name=name, members=tuple(members))
        for sid in members:
            if sid in claimed and claimed[sid] != name:
                overlaps.append(f"{sid!r} in {claimed[sid]!r} and {name!r}")
            else:
                claimed[sid] = name
    if overlaps:
        shown = "; ".join(overlaps[:5])
        more = f" (and {len(overlaps) - 5} more)" if len(overlaps) > 5 else ""
        warnings.warn(f"sets overlap: {shown}{more}", SetOverlapWarning, stacklevel=2)
    return sets


def save_adapter(path: str | Path, checkpoint: AdapterCheckpoint) -> None:
    """Write an adapter checkpoint as JSON with keys dim/weights/bias/metadata."""
    payload = {
        "dim": checkpoint.dim,
        "weights": [[float(v) for v in row] for row in checkpoint.weights],
        "bias": [float(v) for v in checkpoint.bias],
        "metadata": dict(checkpoint.metadata),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, allow_nan=False)
        fh.write("\n")


def load_adapter(path: str | Path) -> AdapterCheckpoint:
    """Read an adapter checkpoint, validating shapes and finiteness."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"adapter file is not valid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise FormatError("adapter file must be a JSON object")
    missing = {"dim", "weights", "bias"} - obj.keys()
    if missing:
        raise FormatError(f"adapter file missing keys: {sorted(missing)}")
    dim = obj["dim"]
    if not isinstance(dim, int):
        raise FormatError("adapter dim must be an integer")
    try:
        weights = np.asarray(obj["weights"], dtype=np.float64)
        bias = np.asarray(obj["bias"], dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError("adapter weights/bias must be numeric arrays") from None
    return AdapterCheckpoint(
        dim=dim, weights=weights, bias=bias, metadata=obj.get("metadata", {})
    )
