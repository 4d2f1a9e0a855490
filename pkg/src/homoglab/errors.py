"""Exception types shared across the package."""

from __future__ import annotations


class HomoglabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(HomoglabError):
    """A configuration or input value violates a documented precondition."""


class BadLevel(ValidationError):
    """Dyadic level outside the admissible range for the grid."""


class BadPeriod(ValidationError):
    """Deterministic-field period does not divide the torus side length."""


class MaskEmpty(ValidationError):
    """A cell mask selects no cells."""


class NegativeSpectrum(HomoglabError):
    """Periodized covariance has negative spectral mass beyond tolerance."""


class DegenerateFit(HomoglabError):
    """Least-squares exponent fit is degenerate (all abscissae equal)."""


class NoConvergence(HomoglabError):
    """An iterative solver failed to reach its tolerance.

    Carries the solve statistics so callers can report partial progress.
    """

    def __init__(self, message: str, stats=None):
        super().__init__(message)
        self.stats = stats
