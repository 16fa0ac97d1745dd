"""Exception hierarchy and CLI exit-code mapping.

Every library error derives from :class:`HmilError` and from the builtin that
best describes it, so callers may catch either.
"""

from typing import Optional

from pydantic import ValidationError


class HmilError(Exception):
    """Base class for all library errors."""


class ShapeError(HmilError, ValueError):
    """Operand shapes do not conform."""


class DomainError(HmilError, ArithmeticError):
    """An operation was evaluated outside its mathematical domain."""


class DegenerateInputError(HmilError, ArithmeticError):
    """Input makes the operation undefined (zero-norm row, zero column, ...)."""


class GraphError(HmilError, RuntimeError):
    """Computation-graph misuse (unreachable parameter, foreign node, ...)."""


class NumericError(HmilError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class TaxonomyError(HmilError, ValueError):
    """Invalid label taxonomy."""


class ConfigError(HmilError, ValueError):
    """Invalid configuration."""


class FormatError(HmilError, ValueError):
    """Malformed binary or text file.

    :ivar offset: Byte offset at which the defect was detected, if known.
    """

    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class DatasetError(HmilError, ValueError):
    """Dataset content violates an invariant."""


class SplitError(HmilError, ValueError):
    """A split cannot be produced for the requested scheme."""


class ScheduleError(HmilError, ValueError):
    """Epoch index or total epochs outside the loss schedule."""


class LabelError(HmilError, ValueError):
    """A class label is out of range."""


class MetricError(HmilError, ValueError):
    """A metric is undefined for the given input."""


class CompatibilityError(HmilError, ValueError):
    """Checkpoint and dataset disagree on a structural field."""


class ThresholdBreach(HmilError, RuntimeError):
    """An acceptance threshold was exceeded."""


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_THRESHOLD = 3

_VALIDATION_ERRORS = (
    ConfigError,
    TaxonomyError,
    DatasetError,
    FormatError,
    SplitError,
    LabelError,
    CompatibilityError,
    ValidationError,
    FileNotFoundError,
    FileExistsError,
)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code.

    :param exc: Exception raised by a command.
    :returns: ``3`` for threshold breaches, ``1`` for validation errors and
              ``2`` for anything else.
    """
    if isinstance(exc, ThresholdBreach):
        return EXIT_THRESHOLD
    if isinstance(exc, _VALIDATION_ERRORS):
        return EXIT_VALIDATION
    return EXIT_RUNTIME
