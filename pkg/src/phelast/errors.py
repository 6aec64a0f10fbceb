"""Exception types shared across the package."""


class PhelastError(Exception):
    """Base class for all package-specific errors."""


class StrainDomainError(PhelastError, ValueError):
    """A strain left the admissible domain C > 0 of the stored-energy law."""


class NonConvergenceError(PhelastError, RuntimeError):
    """Newton iteration exhausted its iteration budget.

    Attributes
    ----------
    residual_norm : float
        Euclidean norm of the residual at the last iterate.
    iterations : int
        Number of Newton updates performed before giving up.
    """

    def __init__(self, message, residual_norm, iterations):
        super().__init__(message)
        self.residual_norm = float(residual_norm)
        self.iterations = int(iterations)


class ConfigError(PhelastError, ValueError):
    """A run configuration failed to parse or validate.

    ``field`` holds the dotted path of the offending entry (semantic errors),
    ``line`` the 1-based line number (syntax errors); either may be None.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
