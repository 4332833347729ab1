"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised for inputs that violate an operation's preconditions."""


class NumericalFailure(ArithmeticError):
    """A factorization or solve failed on inputs that should be well posed."""


class ConvergenceFailure(NumericalFailure):
    """The lagged-diffusivity loop hit its iteration cap.

    The last iterate is kept on the exception so callers can still report it.
    """

    def __init__(self, message, last_iterate=None, iterations=0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class CapacityError(MemoryError):
    """Refusal to form a dense matrix larger than the configured cap."""
