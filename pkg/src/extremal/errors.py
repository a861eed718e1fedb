"""Exception types shared across the package."""

from __future__ import annotations


class ExtremalError(Exception):
    """Base class for all package-specific errors."""


class InvalidFieldError(ExtremalError):
    """A scalar field evaluated to NaN/inf or has malformed data."""


class RatePositivityError(ExtremalError):
    """A rate field (intensity or point density) is not strictly positive."""


class EmptyFunctionError(ExtremalError):
    """A sample function with no points was passed where one is required."""


class NonterminationError(ExtremalError):
    """The record sampler hit its iteration cap before the stopping rule fired."""

    def __init__(self, message: str, points_generated: int, best_values: list[float]):
        super().__init__(message)
        self.points_generated = points_generated
        self.best_values = best_values


class InternalConsistencyError(ExtremalError):
    """A density failed its built-in normalization check."""


class QuadratureError(ExtremalError):
    """Adaptive quadrature did not converge within the refinement budget."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class SampleSizeError(ExtremalError):
    """Too few samples for the requested statistical test."""


class ConfigError(ExtremalError):
    """A scenario configuration file is invalid."""
