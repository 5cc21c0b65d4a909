"""Exception types shared across the package."""
from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class Infeasible(Exception):
    """No representation satisfies the rate constraint at the given bandwidth.

    ``min_bandwidth`` is the smallest bandwidth (Mbps) at which the problem
    would have become feasible, when that is known.
    """

    def __init__(self, message: str, min_bandwidth: float | None = None):
        super().__init__(message)
        self.min_bandwidth = min_bandwidth


class FitError(ValueError):
    """Raised when a least-squares fit is under-determined."""


class InputError(ValueError):
    """Malformed input file. Carries the offending path and line when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line
        self.reason = message
