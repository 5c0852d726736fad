"""Exception types raised by the solver library."""

from __future__ import annotations

from typing import Optional


class TimeScaleDomainError(ValueError):
    """A time value does not belong to the time scale."""

    def __init__(self, t: float, nearest: str) -> None:
        super().__init__(f"time {t!r} is not in the time scale (nearest cell: {nearest})")
        self.t = t
        self.nearest = nearest


class ConfigurationError(ValueError):
    """Problem data that cannot describe a valid periodic problem."""


class PreconditionError(ValueError):
    """An operator was called outside its domain."""


class ScenarioError(ConfigurationError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None) -> None:
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(f"{where}{message}")
        self.path = path
        self.line = line
