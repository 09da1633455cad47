"""Exception hierarchy shared across the package."""


class UsemocError(Exception):
    """Base class for all package errors."""


class InputError(UsemocError, ValueError):
    """An argument violates a documented precondition."""


class NumericalConditioningError(UsemocError, ArithmeticError):
    """Kernel matrix could not be factorized even after jitter escalation."""


class ConfigurationError(UsemocError, ValueError):
    """A problem or experiment definition is inconsistent."""


class EvaluationError(UsemocError, RuntimeError):
    """The expensive evaluator failed. ``x`` holds the offending input."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = None if x is None else list(map(float, x))


class EvaluationTimeout(EvaluationError):
    """The external evaluator did not answer within its timeout."""


class ProtocolError(EvaluationError):
    """The external evaluator answered with a malformed payload."""

    def __init__(self, message, x=None, raw=None):
        super().__init__(message, x)
        self.raw = raw


class CandidatesExhausted(UsemocError):
    """Every cheap-front candidate has already been evaluated."""


class ConfigMismatchError(UsemocError):
    """Resuming an output directory whose stored config differs."""

    def __init__(self, message, diff):
        super().__init__(message)
        self.diff = diff
