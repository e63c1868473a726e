"""Exception types raised by the library."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class SingularityError(DomainError):
    """A kernel was evaluated on its diagonal singularity."""


class ConvergenceError(RuntimeError):
    """An iterative numerical procedure failed to stabilise.

    ``iterates`` holds the last values seen, most recent last.
    """

    def __init__(self, message, iterates=()):
        super().__init__(message)
        self.iterates = tuple(iterates)
