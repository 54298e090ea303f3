"""Exception hierarchy.

Three families map onto CLI exit codes: configuration problems (2), bad input
data (3) and numerical failures (4).
"""


class DuplexError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(DuplexError):
    exit_code = 2


class DataError(DuplexError):
    exit_code = 3


class NumericalError(DuplexError):
    exit_code = 4


# -- ingest ---------------------------------------------------------------


class MissingColumn(DataError):
    def __init__(self, column, available=()):
        self.column = column
        super().__init__(f"missing column {column!r} (have {list(available)})")


class NonNumericValue(DataError):
    def __init__(self, line, value):
        self.line = line
        super().__init__(f"line {line}: non-numeric value {value!r}")


class NegativeValue(DataError):
    def __init__(self, line, value):
        self.line = line
        super().__init__(f"line {line}: negative value {value!r}")


class WeightOutOfRange(DataError):
    pass


class EmptyMap(DataError):
    pass


class UnmappedCode(DataError):
    def __init__(self, code):
        self.code = code
        super().__init__(f"code {code!r} not present in concordance")


class EmptyWindowGrid(DataError):
    pass


class MissingDeflator(DataError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no deflator for {key!r}")


class NonPositiveDeflator(DataError):
    pass


# -- networks -------------------------------------------------------------


class UnknownCode(DataError):
    def __init__(self, code):
        self.code = code
        super().__init__(f"code {code!r} not in industry index")


class LayerSizeSourceMissing(DataError):
    pass


class IndexMismatch(DataError):
    pass


class KTooLarge(DataError):
    pass


class ZeroDispersion(NumericalError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )


class DegenerateGraph(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


# -- panel ----------------------------------------------------------------


class GridMismatch(DataError):
    pass


class DomainError(DataError):
    pass


class TooFewObservations(DataError):
    pass


class UnknownClass(DataError):
    pass


class EmptyCell(DataError):
    pass


# -- estimation -----------------------------------------------------------


class RankDeficient(NumericalError):
    pass


class NonPositiveWeight(DataError):
    pass


class InsufficientPeriods(DataError):
    pass


class SingularWeightingMatrix(NumericalError):
    pass


class TooFewPeriodsForOrder(NumericalError):
    pass


class JustIdentified(NumericalError):
    pass


# -- reporting ------------------------------------------------------------


class MissingCell(DataError):
    pass
