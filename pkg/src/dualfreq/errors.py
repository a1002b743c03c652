"""Exception types and warning categories shared across the package."""


class DualFreqError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(DualFreqError, ValueError):
    """Invalid argument values or mutually inconsistent inputs."""


class ModelError(DualFreqError, ValueError):
    """Structurally invalid generative model (e.g. a non-causal AR base)."""


class NumericalError(DualFreqError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""


class ModelWarning(UserWarning):
    """Soft model-quality issues that do not invalidate a computation."""
