"""Exception types shared across the package."""

from __future__ import annotations


class DialectIDError(Exception):
    """Base class for all package errors."""


class DataFormatError(DialectIDError, ValueError):
    """An input file or record violates its documented format."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if line is not None:
            where = f" at line {line}"
        if path is not None:
            where += f" of {path}"
        super().__init__(f"{message}{where}")


class ConfigurationError(DialectIDError):
    """Inconsistent options or settings."""


class MissingResourceError(ConfigurationError):
    """A feature family is enabled but the resource it needs was not supplied."""


class InsufficientDataError(DialectIDError):
    """Too few sentences for the requested sampling or split."""


class UndefinedPMIError(DialectIDError, ValueError):
    """PMI requested for a word that never occurs in the dialect."""


class InvariantError(DialectIDError):
    """An internal consistency check failed."""
