"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class BoundaryCaseError(DomainError):
    """Parameter sits on an excluded boundary of an asymptotic formula."""


class NonInvertibleError(DomainError):
    """The mixture map is constant, so loss levels have no unique preimage."""


class FitError(RuntimeError):
    """Nonlinear least squares did not converge.

    The last iterate is kept on ``params`` so callers can inspect it.
    """

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class IngestionError(ValueError):
    """Malformed exposure CSV; ``line`` holds the 1-based offending line."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
