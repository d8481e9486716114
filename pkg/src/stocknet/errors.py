"""Exception types. Each family maps onto one CLI exit code."""


class StocknetError(Exception):
    exit_code = 1


class ValidationError(StocknetError, ValueError):
    """Bad configuration or arguments (exit code 2)."""

    exit_code = 2


class DataError(StocknetError, ValueError):
    """Input data violates a precondition (exit code 3)."""

    exit_code = 3


class IngestError(DataError):
    pass


class EmptyPanelError(DataError):
    pass


class NumericError(StocknetError, ArithmeticError):
    """Divergent or non-convergent numerical step (exit code 4)."""

    exit_code = 4
