"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter vector violates the model's constraints."""


class NumericalDomainError(ArithmeticError):
    """A recursion reached a non-positive or non-finite variance."""


class NotPositiveDefiniteError(ArithmeticError):
    """A dense covariance matrix failed to factorize."""


class NonConvergenceError(RuntimeError):
    """Nested sampling hit ``max_iterations`` before terminating.

    The partially accumulated run is attached as ``partial`` so callers can
    inspect how far it got.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
