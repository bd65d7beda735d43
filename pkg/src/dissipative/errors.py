"""Exception types raised by the numerical routines."""


class InvalidArgument(ValueError):
    """A precondition on the inputs was violated."""


class Unsupported(ValueError):
    """The request lies outside the supported parameter range."""


class SpectralSingularityError(ArithmeticError):
    """``Id - iA`` is numerically singular, so the boundary value does not exist."""

    def __init__(self, message, lam=None, sigma_min=None):
        super().__init__(message)
        self.lam = lam
        self.sigma_min = sigma_min


class OrderUndetermined(RuntimeError):
    """The log-log fit for the order of a singularity is too poor to round."""


class NotFound(RuntimeError):
    """No eigenvalue crossing with positive real part in the requested window."""


class MatchingDegenerate(ArithmeticError):
    """The incoming amplitude vanished when matching to free solutions."""


class BoxTooSmall(RuntimeError):
    """Probability reached the Dirichlet wall of the computational box."""


class ClassificationUndetermined(RuntimeError):
    """The decay-rate fit did not converge."""
