"""Error vocabulary for the latency laboratory.

PURPOSE:
Analytic formulas, the matrix-analytic solver and the simulator fail in a small
number of distinct ways. Each gets its own exception type so that a parameter
sweep can tell "this cell is beyond the stability boundary" apart from "the
inputs were wrong" or "the numerics broke down".

ARCHITECTURE NOTES:
``InvalidParameterError`` subclasses ``ValueError`` so that pydantic validators
can raise it and have it surface as a ``ValidationError`` on model construction.
Builder functions raise it directly.

Example:
    >>> try:
    ...     sm_mean_upper(lambda_=2.0, r=2, t=1, mu=1.0)
    ... except InstabilityError as exc:
    ...     print(exc.constraint)
    lambda >= 1/eta
"""


class LabError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(LabError, ValueError):
    """A parameter lies outside the domain of the requested operation."""


class InstabilityError(LabError):
    """The queue described by the parameters has no steady state.

    Attributes:
        constraint: Human-readable form of the violated stability constraint.
    """

    def __init__(self, constraint: str, message: str | None = None) -> None:
        """Record the violated constraint alongside the message."""
        self.constraint = constraint
        super().__init__(message or f"unstable: {constraint}")


class ApproximationDomainError(LabError):
    """An approximation's internal recursion left its valid range."""


class IterationLimitError(LabError):
    """An iterative solver did not converge within its iteration budget."""


class DegenerateModelError(LabError):
    """A linear system built from a model is singular."""


class DegenerateInputError(LabError):
    """An estimator received no usable samples."""


class ConfigError(LabError):
    """An experiment configuration could not be loaded or resolved."""
