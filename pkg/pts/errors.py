"""
Exceptions raised by the PTS toolkit.
"""
from typing import Optional


class PtsError(Exception):
    """Base class for every error raised by the toolkit."""


class RankDeficient(PtsError):
    """The design restricted to a subset has rank below p."""


class DegenerateData(PtsError):
    """No subset of the requested coverage admits a full-rank fit."""


class DegenerateWeights(PtsError):
    """The reweighting step kept p or fewer observations.

    The partially computed scale (with sigma_hat undefined) is attached so the
    caller can fall back to the preliminary scale.
    """

    def __init__(self, message: str, scale=None):
        super().__init__(message)
        self.scale = scale


class SingularScatter(PtsError):
    """Every MCD start collapsed to a singular scatter matrix."""


class BudgetExceeded(PtsError):
    """An exhaustive enumeration would exceed its subset budget."""

    def __init__(self, message: str, required: Optional[int] = None, budget: Optional[int] = None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class StartFailure(PtsError):
    """No full-rank elemental start could be drawn."""


class AllInfeasible(PtsError):
    """Every Fast-PTS iteration failed to produce a feasible subset."""


class UnknownName(PtsError, KeyError):
    """Unknown benchmark dataset name."""

    def __str__(self):
        return Exception.__str__(self)


class DataError(PtsError):
    """Malformed input data (CSV)."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


class ReportSchemaError(PtsError):
    """A report failed validation against its own JSON schema."""


class InvalidSettings(PtsError, ValueError):
    """Command-line settings that do not apply to the requested run."""
