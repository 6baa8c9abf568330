"""Exception hierarchy shared by the solver and the CLI."""


class Sc3Error(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ScenarioError(Sc3Error, ValueError):
    """Malformed or invalid scenario configuration."""

    exit_code = 2


class InfeasibleError(Sc3Error):
    """No allocation satisfies the stability / information constraints.

    ``loops`` lists the indices of the loops that could not be satisfied.
    """

    exit_code = 3

    def __init__(self, message, loops=()):
        super().__init__(message)
        self.loops = list(loops)


class ConvergenceError(Sc3Error):
    """An iterative routine hit its iteration cap."""

    exit_code = 4

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else None


class VerificationError(Sc3Error):
    exit_code = 5
