"""Exception types raised across the package."""


class DecSlidingError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DecSlidingError, ValueError):
    """Invalid configuration value or inconsistent parameters."""


class GenerationError(DecSlidingError):
    """A random generator failed to produce a valid object."""


class DimensionError(DecSlidingError, ValueError):
    """Array shapes do not match."""


class InputError(DecSlidingError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class ParameterError(DecSlidingError, ValueError):
    """Derived algorithm parameter is out of its admissible range."""


class ConvergenceError(DecSlidingError):
    """Iterative solver hit its iteration cap before reaching tolerance.

    The best iterate found so far is attached as ``best``.
    """

    def __init__(self, message, best=None, value=None):
        super().__init__(message)
        self.best = best
        self.value = value


class StepSizeError(DecSlidingError):
    """Step size too large: the objective diverged."""


class ParseError(DecSlidingError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(DecSlidingError, ValueError):
    """Dataset is empty or contains invalid values."""


class NonFiniteIterateError(DecSlidingError):
    """An iterate became NaN or infinite during a run."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
