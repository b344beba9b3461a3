"""Exception types raised across the package."""


class ScadaError(Exception):
    """Base class for every error raised by scadanb."""


class DataError(ScadaError, ValueError):
    """Input data is unusable (CLI maps these to exit code 2)."""


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing required column {name!r}")
        self.name = name


class ParseError(DataError):
    def __init__(self, row, column, detail=""):
        msg = f"cannot parse row {row} column {column!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.row = row
        self.column = column


class EmptyInput(DataError):
    pass


class EmptyFrame(DataError):
    pass


class NonFinite(DataError):
    pass


class InvalidConfig(ScadaError, ValueError):
    pass


class DimensionMismatch(ScadaError, ValueError):
    pass


class LengthMismatch(ScadaError, ValueError):
    pass


class ZeroTarget(DataError):
    pass


class SingularCovariance(ScadaError, ArithmeticError):
    pass


class TooFewSamples(DataError):
    pass


class DegenerateComponent(ScadaError, ArithmeticError):
    pass


class KTooLarge(ScadaError, ValueError):
    pass


class NonFiniteLoss(ScadaError, ArithmeticError):
    pass


class WindowTooSmall(DataError):
    pass


class InsufficientData(DataError):
    pass
