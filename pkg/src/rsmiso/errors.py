"""Exception types shared across the package."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class DegenerateInputError(ContractError):
    """A precoder or estimate is identically zero where that is not allowed."""


class NumericalError(ArithmeticError):
    """A solve produced a non-finite or singular result.

    ``trace`` carries the partial solver trace, when one exists.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SweepAborted(RuntimeError):
    """Too many trials failed at one grid point of a sweep."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or []
