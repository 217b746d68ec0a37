"""embexport: turn a JSONL corpus into a portable SCSE embedding file."""

from .encoder import HashEncoder, load_encoder
from .export import (
    EmptyCorpusError,
    ExportError,
    ExportJob,
    ModelLoadError,
    export_embeddings,
    read_corpus_jsonl,
)

__all__ = [
    "EmptyCorpusError",
    "ExportError",
    "ExportJob",
    "HashEncoder",
    "ModelLoadError",
    "export_embeddings",
    "load_encoder",
    "read_corpus_jsonl",
]

__version__ = "0.1.0"
