"""Exception hierarchy.

Every error raised on bad input derives from :class:`EigenSpotError`, which is
itself a ``ValueError`` so generic callers can catch it without importing us.
"""

from __future__ import annotations


class EigenSpotError(ValueError):
    """Base class for all input/contract violations."""


class AllZeroMatrix(EigenSpotError):
    pass


class OracleSizeExceeded(EigenSpotError):
    pass


class ZeroVector(EigenSpotError):
    pass


class LengthMismatch(EigenSpotError):
    pass


class TooShort(EigenSpotError):
    pass


class ZeroVariance(EigenSpotError):
    pass


class TooFewGroups(EigenSpotError):
    pass


class ZeroWithinVariance(EigenSpotError):
    pass


class ShapeMismatch(EigenSpotError):
    pass


class ZeroBaselineCell(EigenSpotError):
    def __init__(self, region: int, period: int):
        super().__init__(f"baseline count is zero at region={region}, period={period}")
        self.region = region
        self.period = period


class EmptyFirstPeriod(EigenSpotError):
    pass


class NonPositiveLambda(EigenSpotError):
    pass


class ConfigError(EigenSpotError):
    pass


class MatrixFileError(EigenSpotError):
    """Malformed matrix/verdict file. ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class DegenerateSpectrumWarning(RuntimeWarning):
    """Power iteration hit max_iter; the top two singular values are likely close."""
