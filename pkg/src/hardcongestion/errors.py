"""Exception hierarchy shared by all modules."""


class CongestionError(Exception):
    """Base class for package errors."""


class ParameterError(CongestionError, ValueError):
    """Invalid constructor parameter (non-positive scale, bad kind, ...)."""


class InputError(CongestionError, ValueError):
    """Input data violates a documented precondition."""


class ConfigError(CongestionError, ValueError):
    """Experiment configuration is inconsistent."""


class StepSizeError(CongestionError, ValueError):
    """Time step too large for the strong-convexity guard."""


class ConvergenceError(CongestionError, RuntimeError):
    """Inner solver hit its iteration cap.

    ``best`` holds the iterate with the smallest KKT residual seen.
    """

    def __init__(self, message, best=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class IntegrationError(CongestionError, RuntimeError):
    """A step failed while integrating; carries the partial trajectory."""

    def __init__(self, message, step, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial
