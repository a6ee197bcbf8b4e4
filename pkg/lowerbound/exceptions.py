class LabError(Exception):
    """Base class for errors raised by the lower-bound laboratory."""


class ProblemInputError(LabError, ValueError):
    """Invalid input: dimension mismatch, parameter out of range, bad problem file."""


class NumericalError(LabError, ArithmeticError):
    """A Gram matrix could not be factorized even at the maximal jitter."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class RejectionBudgetExceeded(LabError, RuntimeError):
    """Rejection sampling gave up before producing a valid function."""

    def __init__(self, message, seed=None, parameters=None):
        super().__init__(message)
        self.seed = seed
        self.parameters = parameters or {}
