
class BarroptError(Exception):
    """Base class; `exit_code` is what the CLI returns for it."""
    exit_code = 2


class InputError(BarroptError, ValueError):
    exit_code = 2


class ModelError(InputError):
    pass


class DegenerateModel(ModelError):
    pass


class DomainError(InputError):
    pass


class InvalidInterval(InputError):
    pass


class InvalidPush(InputError):
    pass


class InvalidPair(InputError):
    pass


class OutOfRegime(InputError):
    pass


class UnsupportedModel(InputError):
    pass


class ConfigError(InputError):
    pass


class ConvergenceFailure(BarroptError):
    exit_code = 3


class UnboundedSearch(ConvergenceFailure):
    pass


class NoSignChange(ConvergenceFailure):
    pass


class EmptyD(ConvergenceFailure):
    """The admissible set for the next even barrier is empty at grid resolution."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class MatchingFailure(ConvergenceFailure):
    pass


class NumericalFailure(ConvergenceFailure):
    """A quantity leaves the floating-point range."""


class QuadratureWarning(UserWarning):
    pass
