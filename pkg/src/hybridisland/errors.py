from typing import Optional


class InvalidArgumentError(ValueError):
    """Raised when an operation receives an argument outside its domain."""

    pass


class DivergenceError(Exception):
    """Raised when the harmonic estimator loses numerical health."""

    pass


class EmptySeriesError(Exception):
    """Raised when a measurement window does not fit inside the signal."""

    pass


class InsufficientDataError(Exception):
    """Raised when a series is too short for the requested window."""

    pass


class NetworkValidationError(Exception):
    """Raised when a network model violates its structural invariants."""

    pass


class PowerFlowConvergenceError(Exception):
    """Raised when the power flow does not converge.

    Carries the number of iterations performed and the final largest power
    mismatch so callers can report them.
    """

    def __init__(self, message: str, iterations: int, max_mismatch: float) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.max_mismatch = max_mismatch


class ActuatorError(Exception):
    """Raised when a power-shift command fails or is not acknowledged in time."""

    pass


class StreamGapError(Exception):
    """Raised when a detector input stream skips sample instants."""

    pass


class ScenarioError(Exception):
    """Raised when a scenario or configuration file cannot be used.

    The offending line of the source file is attached when it is known.
    """

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
