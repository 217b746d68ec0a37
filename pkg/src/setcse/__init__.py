"""Set-operation semantic querying over sentence embeddings.

The package ranks the sentences of a carrier set by their mean cosine
similarity to exemplar sets, supporting flat chains of intersection
(select a semantic) and difference (deselect one).  A small affine
adapter can be trained on the exemplar sets with an inter-set contrastive
objective to sharpen the contrasts before ranking; everything runs on
pre-computed embeddings from any model.
"""

from .errors import (
    CorpusParseError,
    DomainError,
    DroppedAnchorWarning,
    FormatError,
    NumericError,
    QueryParseError,
    RangeError,
    SetCseError,
    SetOverlapWarning,
    ShapeError,
    TruncationError,
    UnknownNameError,
    ValidationError,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    eval_difference,
    eval_intersection,
    eval_serial_difference,
    eval_serial_intersection,
    eval_serial_mixed,
    split_examples,
    sweep_n_sample,
)
from .geometry import apply_adapter, cosine_sim, set_similarity
from .operations import (
    OperationSeries,
    RankedEntry,
    RankedResult,
    difference,
    intersection,
    rank_series,
    series_scores,
    top_k,
)
from .query import QueryExpr, SetOperator, evaluate_query, parse_query, render_query
from .store import (
    AdapterCheckpoint,
    Corpus,
    EmbeddingMatrix,
    SemanticSet,
    Sentence,
    load_adapter,
    load_corpus,
    load_sets,
    read_embeddings,
    save_adapter,
    write_embeddings,
)
from .training import (
    NegativePair,
    TrainConfig,
    TrainReport,
    interset_loss,
    interset_loss_grad,
    sample_negative_pairs,
    train_adapter,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterCheckpoint",
    "Corpus",
    "CorpusParseError",
    "DomainError",
    "DroppedAnchorWarning",
    "EmbeddingMatrix",
    "EvalConfig",
    "EvalReport",
    "FormatError",
    "NegativePair",
    "NumericError",
    "OperationSeries",
    "QueryExpr",
    "QueryParseError",
    "RangeError",
    "RankedEntry",
    "RankedResult",
    "SemanticSet",
    "Sentence",
    "SetCseError",
    "SetOperator",
    "SetOverlapWarning",
    "ShapeError",
    "TrainConfig",
    "TrainReport",
    "TruncationError",
    "UnknownNameError",
    "ValidationError",
    "apply_adapter",
    "cosine_sim",
    "difference",
    "eval_difference",
    "eval_intersection",
    "eval_serial_difference",
    "eval_serial_intersection",
    "eval_serial_mixed",
    "evaluate_query",
    "interset_loss",
    "interset_loss_grad",
    "intersection",
    "load_adapter",
    "load_corpus",
    "load_sets",
    "parse_query",
    "rank_series",
    "read_embeddings",
    "render_query",
    "sample_negative_pairs",
    "save_adapter",
    "series_scores",
    "set_similarity",
    "split_examples",
    "sweep_n_sample",
    "top_k",
    "train_adapter",
    "write_embeddings",
]
