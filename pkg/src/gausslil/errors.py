"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or schema."""


class NumericError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""
