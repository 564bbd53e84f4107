"""
Exception hierarchy for the optimization toolkit.
Each error also derives from the builtin a caller would expect to catch.
"""

from typing import Optional


class MBOError(Exception):
    """Base class for all toolkit errors."""


class InputDomainError(MBOError, ValueError):
    """Raised when an argument lies outside the domain an operation accepts."""


class UnsupportedProblemError(MBOError, NotImplementedError):
    """Raised when a problem name or capability is not available."""


class ConfigError(MBOError, ValueError):
    """Raised for schema or invariant violations in run configuration."""

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.field = field
        self.line = line
        self.column = column
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        prefix = f"[{'; '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class KrigingFitError(MBOError, RuntimeError):
    """Raised when the correlation matrix cannot be factorized at the largest nugget."""


class EvaluationError(MBOError, RuntimeError):
    """Raised when a true objective evaluation returns non-finite values."""
