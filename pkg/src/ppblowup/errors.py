"""Exception types shared across the package."""


class NotSpd(ValueError):
    """Matrix is not symmetric positive definite."""


class MaxIterations(RuntimeError):
    """Iterative linear solver did not reach its residual target."""


class NoConvergence(RuntimeError):
    """A constant estimator did not converge within its iteration budget."""


class OutOfRegime(ValueError):
    """Inputs lie outside the energy regime where a formula applies."""


class OutOfRegimeWarning(UserWarning):
    pass


class InsufficientWindow(ValueError):
    """Too few snapshots in the terminal window to extrapolate a blowup time."""


class RegimeUnreachable(ValueError):
    """The initial profile cannot be scaled into the requested regime."""
