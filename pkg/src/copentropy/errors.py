"""Exception and warning types raised across the package."""


class CopEntropyError(Exception):
    """Base class for all errors raised by copentropy."""


class DataError(CopEntropyError, ValueError):
    """Invalid input data (shape, non-finite values, duplicate names)."""


class ParseError(DataError):
    """A CSV cell could not be parsed as a number."""

    def __init__(self, row, col, cell):
        self.row = row
        self.col = col
        self.cell = cell
        super().__init__(f"non-numeric cell {cell!r} at row {row}, column {col}")


class ShapeError(DataError):
    """Ragged rows or mismatched dimensions."""


class EmptyInputError(DataError):
    """No data rows were found."""


class ConfigError(CopEntropyError, ValueError):
    """Estimator or test configuration is out of range."""


class EstimatorError(CopEntropyError, ArithmeticError):
    """The estimator cannot produce a finite value for this sample."""


class PartitionError(CopEntropyError, ValueError):
    """Column groups overlap, are empty, or fall outside the data."""


class ModelError(CopEntropyError, ValueError):
    """A copula model violates its parameter domain."""


class DomainError(CopEntropyError, ValueError):
    """Evaluation point outside the open unit cube."""


class FitError(CopEntropyError, RuntimeError):
    """Copula parameter fitting failed to converge."""


class DegenerateSampleWarning(RuntimeWarning):
    """Constant margins or duplicate points that may bias kNN estimates."""
