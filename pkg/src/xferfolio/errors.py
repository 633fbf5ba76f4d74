"""Exception hierarchy for xferfolio.

Every error raised on bad input derives from :class:`XferfolioError`, which is
itself a :class:`ValueError`, so callers can catch broadly or narrowly.
"""

from __future__ import annotations


class XferfolioError(ValueError):
    """Base class for all input and numerical errors raised by the package."""


class NonFiniteError(XferfolioError):
    pass


class NegativeWeightError(XferfolioError):
    pass


class NotNormalizedError(XferfolioError):
    pass


class ZeroVarianceError(XferfolioError):
    pass


class DimensionMismatchError(XferfolioError):
    pass


class NotSymmetricError(XferfolioError):
    pass


class NotPSDError(XferfolioError):
    pass


class InsufficientDataError(XferfolioError):
    pass


class NegativeLambdaError(XferfolioError):
    pass


class UnsupportedDimensionError(XferfolioError):
    pass


class UnknownFrequencyError(XferfolioError):
    pass


class ParseError(XferfolioError):
    """CSV content could not be parsed; message carries the row/column."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class NonMonotoneTimestampsError(XferfolioError):
    pass


class RaggedRowError(ParseError):
    pass


class NonPositivePriceError(XferfolioError):
    pass


class EmptySplitError(XferfolioError):
    pass


class InvalidSpecError(XferfolioError):
    pass


class UniverseTooSmallError(XferfolioError):
    pass


class ConstantInputError(XferfolioError):
    pass


class LengthMismatchError(XferfolioError):
    pass


class EmptyCellError(XferfolioError):
    pass


class InvalidConfigError(XferfolioError):
    pass
