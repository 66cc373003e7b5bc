"""Exception types shared across the package."""


class LipvarError(Exception):
    """Base class for all package errors."""


class ConfigError(LipvarError):
    """Invalid configuration (rejected preconditions, malformed input)."""


class ResolutionError(LipvarError):
    """A requested scale is below what the grid can resolve."""


class ConvergenceError(LipvarError):
    """An iterative construction failed to reach its tolerance.

    Carries the recorded history so callers can report the decay trace.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
