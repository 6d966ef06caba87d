# dyadlab/errors.py
"""Exception hierarchy shared by the lattice, walks, measures and experiments apps."""


class DyadlabError(Exception):
    """Base class for every error raised by this project."""


class DomainError(DyadlabError, ValueError):
    """An operation was applied outside its domain (e.g. stepping sideways at ∅)."""


class ParityError(DomainError):
    """Halving a dyadic integer whose last bit is 1."""


class InsufficientContext(DyadlabError):
    """A bounded neighbor oracle was asked about a vertex outside its window."""


class StructureError(DyadlabError):
    """Structure recovery found a pattern the lattice cannot produce (oracle bug)."""


class BudgetExceeded(DyadlabError):
    """A walk ran out of steps before its stopping rule fired."""

    def __init__(self, message: str, steps: int | None = None, walker: int | None = None):
        super().__init__(message)
        self.steps = steps
        self.walker = walker


class SolverError(DyadlabError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateLevel(DyadlabError):
    """A level of a crest field sums to zero and cannot be normalized."""


class ResolutionError(DyadlabError, ValueError):
    """A dyadic grid is too coarse for the requested aggregation."""


class FitWarning(UserWarning):
    """Extrapolation window is not monotone; the fitted limit is suspect."""


class ConfigError(DyadlabError):
    """A parameter set or config file was rejected; `errors` maps field names to messages."""

    def __init__(self, message: str, errors: dict | None = None):
        super().__init__(message)
        self.errors = errors or {}
