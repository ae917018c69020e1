"""Error types raised across the package."""


class LinPMError(Exception):
    """Base class for library errors."""


class InvalidInputError(LinPMError, ValueError):
    """Malformed or out-of-range input."""


class IllConditionedError(LinPMError, ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class InfeasibilityError(LinPMError):
    """A linear system or program has no solution.

    ``pair`` holds the offending action pair when one is known.
    """

    def __init__(self, message, pair=None, residual=None):
        super().__init__(message)
        self.pair = pair
        self.residual = residual


class UnsupportedError(LinPMError, NotImplementedError):
    """The requested operation is not defined for this loss space or game."""


class EtaTooLargeError(LinPMError):
    """The feasible set {p : z(p) <= 2/(eta L)} is empty.

    ``min_z`` is the smallest constraint value the solver could reach.
    """

    def __init__(self, message, min_z=None, limit=None):
        super().__init__(message)
        self.min_z = min_z
        self.limit = limit


class NoWitnessError(LinPMError):
    """No action pair of the requested kind exists in the game."""


class LocalObservabilityError(LinPMError):
    """A loss ordering admits no local weight vector; the game is not locally observable."""
