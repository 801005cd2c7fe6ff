"""Exception types. All derive from ValueError so callers can catch broadly."""


class BenchError(ValueError):
    pass


class InvalidBandError(BenchError):
    pass


class InvalidOrderError(BenchError):
    pass


class InsufficientSamplesError(BenchError):
    pass


class DegenerateReferenceError(BenchError):
    pass


class InvalidFactorError(BenchError):
    pass


class InvalidThresholdError(BenchError):
    pass


class NoDataError(BenchError):
    pass


class ShapeError(BenchError):
    pass


class SymmetryError(BenchError):
    pass


class RankError(BenchError):
    pass


class InvalidRegularizationError(BenchError):
    pass


class InvalidRequestError(BenchError):
    pass


class DegenerateRankingError(BenchError):
    pass


class InvalidSizeError(BenchError):
    pass


class InvalidIndexError(BenchError):
    pass


class InvalidNoiseError(BenchError):
    pass


class DegenerateLabelsError(BenchError):
    pass


class UndefinedCorrelationError(BenchError):
    pass


class InvalidPatternError(BenchError):
    pass


class InsufficientDataError(BenchError):
    pass


class InvalidConfigError(BenchError):
    pass


class InvalidDimensionError(BenchError):
    pass


class FormatError(BenchError):
    pass
