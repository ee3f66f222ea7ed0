"""Exception types raised by heatsentry."""


class HeatSentryError(Exception):
    """Base class for all heatsentry errors."""


class ParseError(HeatSentryError):
    """A file could not be parsed; carries a 1-based data row number when known."""

    def __init__(self, message: str, row: int | None = None, path: str | None = None):
        self.row = row
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if row is not None:
            prefix += f"row {row}: "
        super().__init__(prefix + message)


class ValidationError(HeatSentryError):
    """Input data violates a structural invariant or a precondition."""


class SchemaError(HeatSentryError):
    """Column/feature layout does not match what a fitted artifact expects."""


class NumericError(HeatSentryError):
    """A numeric computation failed (singular matrix, non-finite loss, ...)."""


class TrainingError(HeatSentryError):
    """Model training could not proceed or diverged."""


class StratificationError(ValidationError):
    """Too few events per label to build stratified folds."""


class UndefinedMetricError(ValidationError):
    """A metric was requested on an empty or degenerate input."""
