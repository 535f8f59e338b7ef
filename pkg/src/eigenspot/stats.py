"""Standardization, normal tail probabilities, the z-score control chart and
the two significance tests used by the evaluation harness.

Student-t and F tail probabilities go through :func:`betainc`, a regularized
incomplete beta evaluated by Lentz's continued fraction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EigenSpotError,
    LengthMismatch,
    TooFewGroups,
    TooShort,
    ZeroVariance,
    ZeroWithinVariance,
)

_SQRT2 = math.sqrt(2.0)


class Tail(str, enum.Enum):
    TWO_TAILED = "two_tailed"
    LEFT_TAILED = "left_tailed"
    RIGHT_TAILED = "right_tailed"

    @classmethod
    def parse(cls, value: str | Tail) -> Tail:
        if isinstance(value, Tail):
            return value
        aliases = {"two": cls.TWO_TAILED, "left": cls.LEFT_TAILED, "right": cls.RIGHT_TAILED}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise EigenSpotError(f"unknown tail {value!r}") from None


@dataclass(frozen=True, eq=False)
class ControlChartResult:
    deviations: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    flagged: frozenset[int]
    alpha: float
    tail: Tail
    degenerate: bool

    def flagged_at(self, alpha: float) -> frozenset[int]:
        """Indices that would be flagged at another significance level."""
        return frozenset(int(i) for i in np.flatnonzero(self.p_values < alpha))


@dataclass(frozen=True)
class TestReport:
    statistic: float
    p_value: float
    dof: tuple[int, ...]

    __test__ = False  # not a pytest class


def _sample_std(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1))


def standardize(x: Sequence[float] | np.ndarray) -> np.ndarray:
    """z-scores using the sample (n-1) standard deviation.

    A zero-variance input yields the all-zero vector; use
    :func:`is_degenerate` to tell that apart from a genuine all-zero result.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise TooShort(f"standardize needs a vector of length >= 2, got shape {x.shape}")
    s = _sample_std(x)
    if s == 0.0 or not _has_spread(x):
        return np.zeros_like(x)
    return (x - x.mean()) / s


def _has_spread(x: np.ndarray) -> bool:
    # guards against a tiny nonzero std produced by rounding on a constant vector
    return bool(np.ptp(x) > 0.0)


def is_degenerate(x: Sequence[float] | np.ndarray, atol: float = 0.0) -> bool:
    """True when ``x`` has no spread (peak-to-peak range <= ``atol``)."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.ptp(x)) <= atol or _sample_std(x) == 0.0


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_p_value(z: float, tail: Tail | str = Tail.TWO_TAILED) -> float:
    """Tail probability of a standard normal score."""
    if not math.isfinite(z):
        raise EigenSpotError(f"z must be finite, got {z}")
    tail = Tail.parse(tail)
    if tail is Tail.TWO_TAILED:
        return min(1.0, math.erfc(abs(z) / _SQRT2))
    if tail is Tail.LEFT_TAILED:
        return 0.5 * math.erfc(-z / _SQRT2)
    return 0.5 * math.erfc(z / _SQRT2)


def normal_p_values(z: np.ndarray, tail: Tail | str = Tail.TWO_TAILED) -> np.ndarray:
    """Vectorized :func:`normal_p_value`."""
    tail = Tail.parse(tail)
    z = np.asarray(z, dtype=np.float64)
    erfc = np.frompyfunc(math.erfc, 1, 1)
    if tail is Tail.TWO_TAILED:
        out = erfc(np.abs(z) / _SQRT2)
    elif tail is Tail.LEFT_TAILED:
        out = 0.5 * erfc(-z / _SQRT2)
    else:
        out = 0.5 * erfc(z / _SQRT2)
    return np.minimum(out.astype(np.float64), 1.0)


def control_chart(
    deviations: Sequence[float] | np.ndarray,
    alpha: float,
    tail: Tail | str = Tail.TWO_TAILED,
    atol: float = 0.0,
) -> ControlChartResult:
    """z-score control chart: flag elements whose p-value is strictly below alpha.

    A constant input is the legitimate "nothing changed" case: it is reported
    as degenerate with every p-value 1 and nothing flagged. ``atol`` widens
    "constant" to cover floating-point noise in the deviations.
    """
    d = np.array(deviations, dtype=np.float64)
    if d.ndim != 1 or d.size < 2:
        raise TooShort(f"control chart needs >= 2 elements, got shape {d.shape}")
    if not 0.0 < alpha < 1.0:
        raise EigenSpotError(f"alpha must lie in (0, 1), got {alpha}")
    tail = Tail.parse(tail)
    degenerate = is_degenerate(d, atol)
    if degenerate:
        z = np.zeros_like(d)
        p = np.ones_like(d)
    else:
        z = standardize(d)
        p = normal_p_values(z, tail)
    flagged = frozenset(int(i) for i in np.flatnonzero(p < alpha))
    for arr in (d, z, p):
        arr.setflags(write=False)
    return ControlChartResult(d, z, p, flagged, float(alpha), tail, degenerate)


# --- incomplete beta and the t / F tails -----------------------------------

_FPMIN = 1e-300
_EPS = 1e-16


def _betacf(a: float, b: float, x: float, max_iter: int = 10_000) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise EigenSpotError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise EigenSpotError(f"betainc needs a, b > 0, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_tailed(t: float, dof: int) -> float:
    """P(|T| >= |t|) for Student's t with ``dof`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def f_sf(f: float, dof1: int, dof2: int) -> float:
    """P(F >= f) for the F distribution."""
    if f <= 0.0:
        return 1.0
    return betainc(dof2 / 2.0, dof1 / 2.0, dof2 / (dof2 + dof1 * f))


def paired_t_test(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> TestReport:
    """Two-sided paired Student t-test on ``a - b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"paired samples differ in length: {a.shape} vs {b.shape}")
    if a.ndim != 1 or a.size < 2:
        raise TooShort("paired t-test needs at least 2 pairs")
    d = a - b
    n = d.size
    if np.ptp(d) == 0.0:
        raise ZeroVariance("all paired differences are identical; t is undefined")
    s = _sample_std(d)
    t = float(d.mean() / (s / math.sqrt(n)))
    return TestReport(t, t_sf_two_tailed(t, n - 1), (n - 1,))


def one_way_anova(groups: Sequence[Sequence[float]]) -> TestReport:
    """One-way ANOVA F test across ``groups``."""
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(groups)
    if k < 2:
        raise TooFewGroups(f"ANOVA needs >= 2 groups, got {k}")
    for i, g in enumerate(groups):
        if g.ndim != 1 or g.size < 2:
            raise TooShort(f"group {i} needs >= 2 observations")
    N = sum(g.size for g in groups)
    grand = np.concatenate(groups).mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups)
    df1, df2 = k - 1, N - k
    if ss_within == 0.0:
        raise ZeroWithinVariance("every group is constant; F is undefined")
    F = float((ss_between / df1) / (ss_within / df2))
    return TestReport(F, f_sf(F, df1, df2), (df1, df2))
