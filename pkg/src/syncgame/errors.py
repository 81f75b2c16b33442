"""Exception types raised across the package."""


class SyncGameError(Exception):
    """Base class for all package errors."""


class StructuralError(SyncGameError, ValueError):
    """A query refers to an index that does not exist in the game."""


class ValidationError(SyncGameError, ValueError):
    """Input violates a documented invariant.

    ``path`` is a dotted location inside a scenario document when known,
    ``line`` the 1-based line in the source file when it could be located.
    """

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.message = message
        self.path = path
        self.line = line

    def __str__(self):
        where = []
        if self.path:
            where.append(self.path)
        if self.line is not None:
            where.append(f"line {self.line}")
        if where:
            return f"{self.message} ({', '.join(where)})"
        return self.message


class IntegrationError(SyncGameError, ArithmeticError):
    """The vector field produced non-finite values."""

    def __init__(self, message, state=None, step=None):
        super().__init__(message)
        self.state = state
        self.step = step


class RateBoundError(SyncGameError, ValueError):
    """A switch rate exceeded the configured ``rate_bound``.

    Raise the bound; rates are never clipped silently.
    """

    def __init__(self, message, observed=None, bound=None):
        super().__init__(message)
        self.observed = observed
        self.bound = bound
