"""Exception types shared across the package."""


class BoundsError(Exception):
    """Base class for all package errors."""


class InvalidProblemError(BoundsError, ValueError):
    """Source/channel parameters do not describe a valid problem instance."""


class DegenerateConditioningError(BoundsError, ValueError):
    """A conditional quantity is undefined because a correlation is +-1."""


class ParameterOverflowError(BoundsError, ValueError):
    """Coding parameters produced non-finite covariance entries."""


class DegenerateVariableError(BoundsError, ValueError):
    """A variable with zero variance was passed where a correlation is needed."""


class NotMarkovError(BoundsError, ValueError):
    """A distribution that must factor as a Markov chain does not."""


class ValidationError(BoundsError, ValueError):
    """Malformed configuration or input file."""
