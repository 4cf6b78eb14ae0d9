"""Exception hierarchy for causal-var.

Every error raised on purpose by the library derives from
:class:`CausalVarError`.  The concrete classes also derive from the
closest built-in exception so that callers catching ``ValueError`` or
``ArithmeticError`` keep working.  The command-line interface maps each
class to an exit code through :attr:`CausalVarError.exit_code`.
"""

from typing import Optional


class CausalVarError(Exception):
    """Base class for all causal-var errors."""

    exit_code: int = 1


class UsageError(CausalVarError):
    """The caller asked for something that does not exist or is malformed."""

    exit_code = 2


class ModelValidationError(CausalVarError, ValueError):
    """A value type was built with inconsistent shapes or broken invariants."""

    exit_code = 3


class DomainError(CausalVarError, ValueError):
    """The inputs are well formed but outside the operation's domain.

    Typical cases are an unstable model where stability is required, a
    cyclic instantaneous matrix, or a negative forcing strength.
    """

    exit_code = 3


class DataFormatError(CausalVarError, ValueError):
    """A CSV or JSON document could not be parsed.

    Attributes:
        row: One-based line number of the offending row, when known.
    """

    exit_code = 3

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class NumericalError(CausalVarError, ArithmeticError):
    """A numerical routine failed or its result cannot be trusted."""

    exit_code = 4


class SimulationOverflowError(NumericalError):
    """A simulated state left the finite range.

    Attributes:
        index: Time index of the first non-finite or out-of-bound state.
    """

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class EstimationError(NumericalError):
    """Least-squares estimation could not produce a model."""


__all__ = [
    "CausalVarError",
    "UsageError",
    "ModelValidationError",
    "DomainError",
    "DataFormatError",
    "NumericalError",
    "SimulationOverflowError",
    "EstimationError",
]
