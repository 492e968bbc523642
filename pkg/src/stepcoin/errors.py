"""Exception hierarchy shared by all modules."""


class StepcoinError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(StepcoinError, ValueError):
    """An input violates a documented precondition."""


class NotPSDError(ValidationError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class PoleError(StepcoinError, ArithmeticError):
    """sec(t*theta) diverges: the transfer matrix does not exist at this step.

    The walk is completely localized at such a step, so callers computing a
    Lyapunov exponent treat this as divergence rather than failure.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class BandError(StepcoinError, ArithmeticError):
    """|cos(omega) sec(theta)| > 1: the diagonalizing frequency is complex."""


class ResourceBudgetError(StepcoinError, RuntimeError):
    """A run would exceed the configured lattice-site budget."""
