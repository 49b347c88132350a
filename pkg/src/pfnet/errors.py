"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
``DivergenceError`` -> 3.
"""


class PFNetError(Exception):
    pass


class DimensionError(PFNetError, ValueError):
    """Operand shapes are incompatible."""


class ContractError(PFNetError, ValueError):
    """A precondition of an operation does not hold."""


class NonFiniteError(PFNetError, ArithmeticError):
    """An operation produced NaN or Inf."""


class ConfigError(PFNetError, ValueError):
    pass


class DataError(PFNetError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        super().__init__(message)


class EmptySplitError(DataError):
    def __init__(self, split, message):
        self.split = split
        super().__init__(message)


class SingularFitError(PFNetError, ArithmeticError):
    pass


class MetricError(PFNetError, ValueError):
    """Metric is undefined for the given inputs (degenerate truth or zero variance)."""


class DivergenceError(PFNetError, RuntimeError):
    def __init__(self, epoch, last_finite_loss):
        self.epoch = epoch
        self.last_finite_loss = last_finite_loss
        super().__init__(
            f"training diverged at epoch {epoch} (last finite loss {last_finite_loss!r})"
        )
