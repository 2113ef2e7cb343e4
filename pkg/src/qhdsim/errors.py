"""Shared exception taxonomy for the simulator."""


class QhdError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(QhdError, ValueError):
    """A constructor or operation received an out-of-range parameter."""


class RepresentationError(QhdError):
    """A wave state was supplied in the wrong representation (position vs fourier)."""


class GridMismatchError(QhdError):
    """Two objects that must share a grid do not."""


class DomainError(QhdError, ValueError):
    """A point or time lies outside the valid domain."""


class ResolutionError(QhdError):
    """A sampling grid is too coarse for the requested operation."""


class UnsupportedScheduleError(QhdError):
    """A closed form was requested for a schedule without the required structure."""


class UnreachableTargetError(QhdError):
    """The schedule cannot reach the requested stopping threshold."""


class GeometryError(QhdError):
    """The simulation box cannot hold the requested state."""


class BoundHypothesisError(QhdError, ValueError):
    """An error-bound formula was called outside its hypothesis region."""


class FitError(QhdError):
    """A regression/fit could not be performed on the given data."""


class NumericError(QhdError):
    """A numerical routine failed to converge."""


class InstabilityError(QhdError):
    """Norm drift exceeded the stability threshold during evolution."""


class StepBudgetError(QhdError):
    """Evolution exceeded max_steps.

    Carries whatever was computed so far so callers can salvage a
    partial time series.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
