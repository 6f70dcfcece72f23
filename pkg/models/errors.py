"""Exception hierarchy shared by services and the command line."""
from typing import Optional


class CalibFreeError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(CalibFreeError, ValueError):
    """An operation received arguments violating its preconditions."""


class NumericError(CalibFreeError, ArithmeticError):
    """A numeric routine failed (singular matrix, non-finite loss)."""

    def __init__(self, message: str, component: Optional[str] = None):
        super().__init__(message)
        self.component = component


class UndefinedMetricError(CalibFreeError):
    """A metric has no defined value for the given inputs."""


class ParseError(CalibFreeError):
    """A data file row could not be parsed."""

    def __init__(self, path: str, line: int, column: Optional[str], reason: str):
        location = f"{path}:{line}" + (f" column '{column}'" if column else "")
        super().__init__(f"{location}: {reason}")
        self.path = path
        self.line = line
        self.column = column
        self.reason = reason


class UsageError(CalibFreeError):
    """The command line was invoked inconsistently."""
