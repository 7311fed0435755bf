"""Exception types raised across the package."""


class ContractError(ValueError):
    """An argument violates an operation's precondition."""


class ConfigurationError(ValueError):
    """Unsupported or inconsistent configuration."""


class UnsupportedOrderError(ValueError):
    """A derivative order exceeds the smoothness of the kernel."""


class StateError(RuntimeError):
    """An object has not been prepared for the requested operation."""


class DomainError(ValueError):
    """A quantity is undefined for the given law (e.g. outside its support)."""


class NumericalRankError(ArithmeticError):
    """Cholesky extension failed even after the jitter cap was reached.

    Attributes
    ----------
    index : int
        1-based index of the pre-basis element whose pivot broke down.
    iteration : int or None
        Optimizer iteration at which the failure happened, when known.
    """

    def __init__(self, message, index, iteration=None):
        super().__init__(message)
        self.index = index
        self.iteration = iteration
