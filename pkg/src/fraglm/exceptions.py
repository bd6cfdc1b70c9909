"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from contextlib import contextmanager


class FragLMError(Exception):
    """Base class for all errors raised by fraglm."""

    exit_code = 1
    stage = None


class InvalidArgumentError(FragLMError, ValueError):
    exit_code = 2


class EmptySupportError(InvalidArgumentError):
    """A mask with no observed grid point was used for integration."""


class IncompleteDataError(InvalidArgumentError):
    """A complete-data routine received a partially observed curve."""


class ConfigurationError(InvalidArgumentError):
    pass


class NumericError(FragLMError, ArithmeticError):
    exit_code = 3


class DegenerateSpectrumError(NumericError):
    pass


class SingularDesignError(NumericError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class InsufficientDataError(FragLMError):
    exit_code = 4


class CoverageError(InsufficientDataError):
    """Some grid point (or pair) is observed by too few curves."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = [] if indices is None else list(indices)


@contextmanager
def stage(name):
    """Label any fraglm error escaping the block with the pipeline stage."""
    try:
        yield
    except FragLMError as err:
        if err.stage is None:
            err.stage = name
            if err.args:
                err.args = (f"[{name}] {err.args[0]}",) + err.args[1:]
        raise
