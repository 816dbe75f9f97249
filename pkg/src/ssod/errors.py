"""Exception types raised across the toolkit."""

from __future__ import annotations


class SSODError(Exception):
    """Base class for data and validation failures (CLI exit code 2)."""


class ValidationError(SSODError, ValueError):
    pass


class ParseError(ValidationError):
    """Malformed input file; message names the file and, where known, the line."""

    def __init__(self, message: str, path: object = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
