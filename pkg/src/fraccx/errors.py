"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """A run configuration violates a documented invariant."""


class IterationFailure(RuntimeError):
    """An iterative solver failed to converge.

    Carries the last residual so callers can report how far the
    iteration got before giving up.
    """

    def __init__(self, message, residual=None, iterations=None):
        if residual is not None:
            message = f"{message} (residual={residual:.3e}, iterations={iterations})"
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SchemeError(RuntimeError):
    """A discrete scheme violated a structural guarantee (e.g. monotonicity)."""


class InconsistencyError(RuntimeError):
    """A computed quantity contradicts a structural sign/positivity guarantee."""


class MountainPassError(RuntimeError):
    """The mountain-pass search collapsed onto the known local minimizer."""
