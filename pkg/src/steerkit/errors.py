"""Exception hierarchy shared by every steerkit module."""


class SteerkitError(Exception):
    """Base class for all steerkit errors."""


class ValidationError(SteerkitError, ValueError):
    """An input object violates one of its invariants."""


class DimensionError(ValidationError):
    pass


class NotHermitianError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class TooManyStrategiesError(SteerkitError):
    pass


class SolverError(SteerkitError):
    """The SDP solver did not return an optimal, verified solution."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class RankDeficientError(SteerkitError):
    """A tomography set does not span the Hermitian operator space."""


class DegenerateGameError(SteerkitError):
    """A game has a non-positive local payoff bound."""


class IndexMismatchError(SteerkitError, IndexError):
    """Correlation table and game index ranges disagree."""
