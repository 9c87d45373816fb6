"""Exception types shared across the package."""


class SepidentError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatchError(SepidentError, ValueError):
    """A vector or matrix does not have the required length/shape."""

    def __init__(self, what: str, expected: int, actual: int):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected length {expected}, got {actual}")


class NumericOverflowError(SepidentError, ArithmeticError):
    """A computation produced a non-finite value."""

    def __init__(self, where: str, index: int | None = None):
        self.where = where
        self.index = index
        loc = f" at index {index}" if index is not None else ""
        super().__init__(f"non-finite value in {where}{loc}")


class SingularMatrixError(SepidentError, ValueError):
    """A linear solve failed because the system is (numerically) singular."""

    def __init__(self, what: str, cond: float | None = None):
        self.what = what
        self.cond = cond
        detail = f" (estimated condition number {cond:.3e})" if cond is not None else ""
        super().__init__(f"{what} is numerically singular{detail}")


class SeriesFormatError(SepidentError, ValueError):
    """A series file violates the documented CSV schema."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)


class MetricDomainError(SepidentError, ValueError):
    """A metric was evaluated outside its domain (e.g. zero reference norm)."""


class ConfigError(SepidentError, ValueError):
    """An experiment or estimator configuration is invalid."""
