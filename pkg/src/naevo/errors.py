# src/naevo/errors.py

from typing import Optional


class NaevoError(Exception):
    """Base class for every error raised by naevo. `exit_code` is the CLI contract."""
    exit_code = 3


class ConfigError(NaevoError):
    """Configuration file missing, unreadable or violating the schema."""
    exit_code = 1

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class CertificateError(NaevoError):
    """No positive-definiteness certificate could be established."""
    exit_code = 2

    def __init__(self, message: str, hypothesis: str = "pos_def",
                 witness_t: Optional[float] = None, witness_value: Optional[float] = None):
        self.hypothesis = hypothesis
        self.witness_t = witness_t
        self.witness_value = witness_value
        super().__init__(message)


class SolveError(NaevoError):
    """A time step could not be taken (singular or non-accretive step matrix)."""
    exit_code = 3

    def __init__(self, message: str, step_time: Optional[float] = None):
        self.step_time = step_time
        super().__init__(message)


class PreconditionError(SolveError):
    pass


class DivergenceError(SolveError):
    pass


class IterationLimitError(SolveError):

    def __init__(self, message: str, last_ratio: float = float("nan")):
        self.last_ratio = last_ratio
        super().__init__(message)


class VerificationError(NaevoError):
    exit_code = 4

    def __init__(self, message: str, failed: Optional[list] = None):
        self.failed = list(failed or [])
        super().__init__(message)


class ShapeError(NaevoError, ValueError):
    """Grid or dimension mismatch between trajectories, families and operators."""
    exit_code = 3
