"""Exception hierarchy shared by all ccsim modules."""


class CCSimError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CCSimError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConvergenceError(CCSimError):
    """A series failed to reach its tolerance within the term budget.

    Carries the partial sum accumulated so far in ``partial``.
    """

    def __init__(self, message: str, partial: float = float("nan")):
        super().__init__(message)
        self.partial = partial


class NumericInstabilityError(CCSimError):
    """Alternating-sum cancellation produced values outside tolerance."""


class NoSolutionError(CCSimError):
    """An inverse solve was requested for a target outside the attainable range."""


class BracketError(CCSimError):
    """A bisection bracket could not be established or refined (internal error)."""


class DivergenceError(CCSimError):
    """A closed-form series was evaluated outside its region of convergence."""


class InsufficientDataError(CCSimError):
    """Too few usable replicas to compute the requested statistic."""


class EdgeListFormatError(CCSimError, ValueError):
    """Malformed edge-list input (bad tokens, self-loops, ...)."""


class GraphValidationError(CCSimError, ValueError):
    """A parsed graph violates a structural requirement (e.g. connectivity)."""
