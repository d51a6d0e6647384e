"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a formula."""


class ConfigurationError(RuntimeError):
    """A space, action or sweep is missing something a check needs."""


class PreconditionError(ValueError):
    """Inputs violate a stated precondition of an operation."""


class NoConvergenceError(RuntimeError):
    """An iterative search hit its cap before meeting its target."""


class AccuracyError(RuntimeError):
    """A requested numerical tolerance could not be certified."""


class UnrepresentableError(ValueError):
    """A group element has no factorization of the requested shape."""
