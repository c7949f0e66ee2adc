"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class StructuralRecoveryError(Exception):
    """Base class for errors raised by this package."""


class DomainError(StructuralRecoveryError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConfigError(StructuralRecoveryError, ValueError):
    """Invalid model, simulation or run configuration."""


class DataValidationError(StructuralRecoveryError):
    """Input records violate the CSV schema or record invariants.

    ``diagnostics`` holds one human-readable message per rejected row.
    """

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        self.diagnostics = list(diagnostics or [])
        if self.diagnostics:
            shown = "\n  ".join(self.diagnostics[:20])
            more = len(self.diagnostics) - 20
            message = f"{message}\n  {shown}"
            if more > 0:
                message += f"\n  ... and {more} more"
        super().__init__(message)


class DuplicateKeyError(DataValidationError):
    """A record key that must be unique occurs more than once."""


class DegenerateCohortError(StructuralRecoveryError):
    """Default rate undefined: empty cohort or every member withdrawn."""

    def __init__(self, message: str, n_c: int = 0, n_w: int = 0, n_d: int = 0):
        super().__init__(message)
        self.n_c = n_c
        self.n_w = n_w
        self.n_d = n_d


class InsufficientDataError(StructuralRecoveryError):
    """Too few usable observations for the requested statistic or fit."""


class ZeroVarianceError(StructuralRecoveryError):
    """A coordinate has zero variance, so correlation is undefined."""
