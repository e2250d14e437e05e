"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class CapabilityError(ValidationError):
    """Request is outside what an operation supports (e.g. grid oracle in d > 3)."""


class NumericalError(ArithmeticError):
    """A numerical step failed (e.g. a correlation matrix is not positive definite)."""
