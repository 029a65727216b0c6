"""
Exception hierarchy shared by all modules.

The CLI maps ConfigError to exit status 2 and any other SgmError to 3.
"""

from typing import Optional


class SgmError(Exception):
    """Base class for every error raised by sgm_schedules."""


class ConfigError(SgmError, ValueError):
    """Invalid config file, flag, or missing CSV column."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DomainError(SgmError, ValueError):
    """Argument outside the domain of an operation (time, shape, order)."""


class InvalidTargetError(SgmError, ValueError):
    """Target parameters that do not define a valid distribution."""


class UnsupportedOperationError(SgmError):
    """Analytic operation requested for a target that has no closed form."""


class RankError(SgmError):
    """A fitted covariance is singular."""


class DegenerateCoordinateError(SgmError):
    """A coordinate has zero empirical standard deviation."""


class PreconditionError(SgmError):
    """A bound variant was requested outside its validity region."""


class LogConcavityError(SgmError):
    """C_t < 0 somewhere on the grid: the W2 contraction argument fails."""


class DivergenceError(SgmError):
    """Backward sampler produced non-finite or exploding particles."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"sampler diverged at step {step}")


class TrainingDivergedError(SgmError):
    """Non-finite training loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite training loss at epoch {epoch}")
