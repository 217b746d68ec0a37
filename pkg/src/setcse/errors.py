"""Exception and warning types shared across the package.

Every error raised by this package derives from :class:`SetCseError`, so
callers (and the CLI) can distinguish domain failures from genuine bugs.
"""

from __future__ import annotations


class SetCseError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SetCseError):
    """A value or artifact violates a structural invariant."""


class CorpusParseError(SetCseError):
    """A corpus line is not valid JSON or lacks required fields.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class FormatError(SetCseError):
    """A binary or JSON artifact does not match its declared format."""


class TruncationError(FormatError):
    """A binary artifact ends early or disagrees with its declared counts."""


class DomainError(SetCseError):
    """An argument is outside the mathematical domain of an operation."""


class ShapeError(SetCseError):
    """Array dimensions do not line up."""


class NumericError(SetCseError):
    """A computation produced a non-finite value."""


class UnknownNameError(SetCseError):
    """A referenced set or sentence name does not resolve."""


class RangeError(SetCseError):
    """An index or count is outside its permitted range."""


class QueryParseError(SetCseError):
    """A query string is not well formed.

    Carries the byte offset (UTF-8) where parsing failed and a description
    of what was expected there.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"at byte {offset}: {message}")
        self.offset = offset


class SetOverlapWarning(UserWarning):
    """Two semantic sets share sentence ids."""


class DroppedAnchorWarning(UserWarning):
    """An anchor sentence had no eligible negatives and was skipped."""
