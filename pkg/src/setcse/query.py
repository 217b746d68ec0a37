"""Textual query language over semantic sets.

Grammar (whitespace-insensitive, no precedence, flat chain):

    query := IDENT (op IDENT)+
    op    := '&' | '∩' | '\\' | '∖'
    IDENT := [A-Za-z_][A-Za-z0-9_-]*

'&' / '∩' select similarity (intersection), '\\' / '∖' deselect it
(difference).  The first identifier names the carrier set whose sentences
are ranked; the rest name operand sets, applied left to right.

Parse errors report the UTF-8 byte offset of the failure and the token
that was expected there.  Parsing is total: any string either parses or
raises :class:`QueryParseError`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import DomainError, QueryParseError, RangeError, UnknownNameError, ValidationError
from .geometry import apply_adapter
from .operations import OperationSeries, RankedResult, rank_series, top_k as take_top
from .store import AdapterCheckpoint, Corpus, EmbeddingMatrix, SemanticSet
from .training import TrainConfig, train_adapter

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
_IDENT_START = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_")
_IDENT_CONT = _IDENT_START | frozenset("0123456789-")

_INTERSECT_CHARS = frozenset({"&", "∩"})
_DIFFERENCE_CHARS = frozenset({"\\", "∖"})


class SetOperator(enum.Enum):
    INTERSECT = "&"
    DIFFERENCE = "\\"


@dataclass(frozen=True)
class QueryExpr:
    """Parsed query: carrier name plus ordered (operator, set name) pairs."""

    carrier_name: str
    operand_ops: tuple[tuple[SetOperator, str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "operand_ops", tuple(self.operand_ops))
        if not self.operand_ops:
            raise ValidationError("a query needs at least one operand")
        for name in (self.carrier_name, *(n for _, n in self.operand_ops)):
            if not _IDENT_RE.fullmatch(name):
                raise ValidationError(f"{name!r} is not a valid set identifier")


def _byte_len(ch: str) -> int:
    return len(ch.encode("utf-8", errors="surrogatepass"))


class _Scanner:
    """Character cursor that tracks the UTF-8 byte offset alongside."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.byte = 0

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos]

    def advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        self.byte += _byte_len(ch)
        return ch

    def skip_ws(self) -> None:
        while not self.eof() and self.text[self.pos].isspace():
            self.advance()


def _read_ident(sc: _Scanner) -> str:
    if sc.eof() or sc.peek() not in _IDENT_START:
        raise QueryParseError("expected identifier", offset=sc.byte)
    out = [sc.advance()]
    while not sc.eof() and sc.peek() in _IDENT_CONT:
        out.append(sc.advance())
    return "".join(out)


def parse_query(text: str) -> QueryExpr:
    """Parse a query string into a :class:`QueryExpr`."""
    sc = _Scanner(text)
    sc.skip_ws()
    carrier = _read_ident(sc)
    ops: list[tuple[SetOperator, str]] = []
    while True:
        sc.skip_ws()
        if sc.eof():
            break
        ch = sc.peek()
        if ch in _INTERSECT_CHARS:
            op = SetOperator.INTERSECT
        elif ch in _DIFFERENCE_CHARS:
            op = SetOperator.DIFFERENCE
        else:
            raise QueryParseError(
                "expected operator '&', '∩', '\\' or '∖'", offset=sc.byte
            )
        sc.advance()
        sc.skip_ws()
        ops.append((op, _read_ident(sc)))
    if not ops:
        raise QueryParseError(
            "expected operator '&', '∩', '\\' or '∖'", offset=sc.byte
        )
    return QueryExpr(carrier_name=carrier, operand_ops=tuple(ops))


def render_query(expr: QueryExpr) -> str:
    """Canonical ASCII rendering; parse(render(expr)) == expr."""
    parts = [expr.carrier_name]
    for op, name in expr.operand_ops:
        parts.append(op.value)
        parts.append(name)
    return " ".join(parts)


def _resolve(name: str, sets: Mapping[str, SemanticSet]) -> SemanticSet:
    try:
        return sets[name]
    except KeyError:
        raise UnknownNameError(f"unknown set {name!r}") from None


def evaluate_query(
    expr: QueryExpr,
    corpus: Corpus,
    sets: Mapping[str, SemanticSet],
    base_embeddings: EmbeddingMatrix,
    adapter: AdapterCheckpoint | None = None,
    top_k: int | None = None,
    train_cfg: TrainConfig | None = None,
    train_sets: Sequence[SemanticSet] | None = None,
) -> RankedResult:
    """Run a parsed query end to end.

    When train_cfg is given, a fresh adapter is first fit on the query's
    operand sets (or on train_sets when supplied, e.g. to contrast against
    semantics beyond the query), then scoring uses the adapted embeddings.
    When an adapter is given instead, it is applied as-is.  Otherwise the
    frozen base embeddings are scored directly.  top_k truncates the
    ranking to at most that many entries.
    """
    carrier = _resolve(expr.carrier_name, sets)
    intersects: list[SemanticSet] = []
    differences: list[SemanticSet] = []
    for op, name in expr.operand_ops:
        operand = _resolve(name, sets)
        (intersects if op is SetOperator.INTERSECT else differences).append(operand)
    for s in (carrier, *intersects, *differences):
        for sid in s.members:
            if sid not in corpus:
                raise UnknownNameError(f"set {s.name!r} references unknown sentence id {sid!r}")

    series = OperationSeries(
        carrier=carrier, intersects=tuple(intersects), differences=tuple(differences)
    )

    if train_cfg is not None:
        if train_sets is not None:
            contrast = list(train_sets)
        else:
            by_name: dict[str, SemanticSet] = {}
            for s in (*intersects, *differences):
                by_name.setdefault(s.name, s)
            contrast = list(by_name.values())
        if len({s.name for s in contrast}) < 2:
            raise DomainError(
                "per-query training needs at least 2 distinct sets to contrast; "
                "pass train_sets to supply them when the query names fewer"
            )
        report = train_adapter(base_embeddings, contrast, train_cfg)
        embeddings = apply_adapter(report.final_adapter, base_embeddings)
    elif adapter is not None:
        embeddings = apply_adapter(adapter, base_embeddings)
    else:
        embeddings = base_embeddings

    ranked = rank_series(series, embeddings)
    if top_k is not None:
        if top_k < 0:
            raise RangeError(f"top_k must be >= 0, got {top_k}")
        ranked = take_top(ranked, min(top_k, len(ranked.entries)))
    return ranked
