"""Exception hierarchy shared across the toolkit."""


class BregDCError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(BregDCError, ValueError):
    """Input array has the wrong shape, length or contains non-finite values."""


class ContractViolationError(BregDCError, ValueError):
    """A mathematical contract (strong convexity, Lipschitz bound, ...) fails."""


class ConfigurationError(BregDCError, ValueError):
    """Solver parameters violate the step-size or parameter inequalities."""


class DomainError(BregDCError, ValueError):
    """An iterate left the interior of the kernel domain."""


class NumericalError(BregDCError, ArithmeticError):
    """An inner numerical routine failed to converge."""


class UnsupportedError(BregDCError, NotImplementedError):
    """Requested quantity is not available for this problem or operator."""


class DivergenceError(BregDCError, ArithmeticError):
    """The solver produced a non-finite iterate.

    The partial trace up to the failure is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
