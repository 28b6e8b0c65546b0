# sntool/errors.py
"""
Exception hierarchy. The CLI maps each family to an exit code:
ConfigError -> 1, DataError -> 2, NumericalError -> 3.
"""
from __future__ import annotations


class SntoolError(Exception):
    """Base class for every error raised on purpose by sntool."""

    exit_code = 1


class ConfigError(SntoolError, ValueError):
    """Invalid configuration, argument or solver/regularizer combination."""

    exit_code = 1


class DataError(SntoolError, ValueError):
    """Unreadable or malformed dataset."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" if column is None else f"line {line}, column {column}"
            message = f"{where}: {message}"
        super().__init__(message)


class NumericalError(SntoolError, ArithmeticError):
    """Breakdown of a linear-algebra routine or a corrupted solver state."""

    exit_code = 3
