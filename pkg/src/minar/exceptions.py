"""Exception hierarchy for the minar package."""


class MinarError(Exception):
    """Base class for all errors raised by minar."""


class NotPositiveDefinite(MinarError, ValueError):
    """A covariance candidate failed the Cholesky pivot check."""


class NodeBudgetExceeded(MinarError, ValueError):
    pass


class FamilyMismatch(MinarError, ValueError):
    pass


class DimensionMismatch(MinarError, ValueError):
    pass


class SeriesTooShort(MinarError, ValueError):
    pass


class OutOfSupport(MinarError, ValueError):
    pass


class NumericalUnderflow(MinarError, ArithmeticError):
    """Every quadrature node carries zero posterior mass."""


class DegenerateSeries(MinarError, ValueError):
    """A component is identically zero (or otherwise carries no information)."""


class DataError(MinarError, ValueError):
    """Malformed count data. ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message, path=None, row=None, column=None):
        self.path = path
        self.row = row
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ParseError(DataError):
    pass


class NegativeCount(DataError):
    pass


class RaggedRows(DataError):
    pass


class ConfigError(MinarError, ValueError):
    """Invalid parameter document; ``key_path`` locates the offending entry."""

    def __init__(self, message, key_path=""):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)
