"""Exception hierarchy shared across the package.

Everything raised on bad data derives from :class:`RelchainError` so the CLI
can map any of it to a single "data error" exit code.
"""
from __future__ import annotations


class RelchainError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RelchainError):
    """A source file failed to parse; carries the offending line number."""

    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class FormatError(RelchainError):
    """A binary artifact violates its declared layout."""


class NotFoundError(RelchainError):
    """A requested word is absent from every consulted vector table."""


class MissingPairError(RelchainError):
    """An ordered word pair has no stored relation embedding."""

    def __init__(self, a: str, b: str):
        super().__init__(f"no relation embedding stored for ({a}, {b})")
        self.pair = (a, b)


class DimensionMismatchError(RelchainError):
    """Vector dimensionality does not match the consuming component."""


class NoRepresentationError(RelchainError):
    """A pair has neither relation chains nor a stored embedding."""
