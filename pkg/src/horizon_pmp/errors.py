"""Exception hierarchy shared by solvers, diagnostics and the CLI."""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .horizon_limits import TruncationReport


class HorizonPMPError(Exception):
    """Base class for every error raised by horizon_pmp."""


class ConfigError(HorizonPMPError, ValueError):
    """Invalid run document, option value or schedule."""


class UnknownProblemError(HorizonPMPError, KeyError):
    """Builtin problem name not registered."""

    def __init__(self, name: str, valid: "list[str]"):
        self.name = name
        self.valid = list(valid)
        super().__init__(f"unknown problem {name!r}; valid names: {', '.join(self.valid)}")

    def __str__(self) -> str:
        return str(self.args[0])


class IntegrationError(HorizonPMPError, ArithmeticError):
    """Non-finite value met while integrating an arc."""

    def __init__(self, index: int, time: float, what: str = "state"):
        self.index = index
        self.time = time
        self.what = what
        super().__init__(f"non-finite {what} at node {index} (t={time:.6g})")


class RangeError(HorizonPMPError, ValueError):
    """Time outside the grid of a trajectory."""


class DegenerateMultiplierError(HorizonPMPError, ZeroDivisionError):
    """Both lambda and psi(0) vanish, so the pair cannot be normalized."""


class NoCertifiedLimitError(HorizonPMPError, LookupError):
    """A truncation report carries no certified limit extremal."""


class SweepAbortedError(HorizonPMPError):
    """A horizon solve blew up; the partial report is attached."""

    def __init__(self, message: str, report: "Optional[TruncationReport]" = None):
        self.report = report
        super().__init__(message)


__all__ = [
    "ConfigError",
    "DegenerateMultiplierError",
    "HorizonPMPError",
    "IntegrationError",
    "NoCertifiedLimitError",
    "RangeError",
    "SweepAbortedError",
    "UnknownProblemError",
]
