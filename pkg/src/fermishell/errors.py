"""Exception types shared across the package."""


class FermishellError(Exception):
    """Base class for package errors."""


class ConfigurationError(FermishellError):
    """Invalid parameters or configuration document."""


class ResourceLimitError(FermishellError):
    """A computation would exceed the configured memory budget.

    Carries the offending Hilbert-space dimension in ``dimension``.
    """

    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class NumericalDegradationError(FermishellError):
    """A numerically guaranteed property was violated beyond tolerance."""
