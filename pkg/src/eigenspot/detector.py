"""EigenSpot hotspot detection and the per-cell ratio baseline.

EigenSpot compares the dominant singular vectors of the baseline and cases
matrices. Elements of the spatial and temporal deviation vectors that a
z-score control chart marks as out of control are combined by Cartesian
product into hotspot cells, so only ``n + m`` significance comparisons are
made. The ratio baseline instead tests every one of the ``n * m`` cells.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EigenSpotError, ShapeMismatch, ZeroBaselineCell
from .linalg import CountMatrix, SingularPair, rank1_svd
from .stats import ControlChartResult, Tail, control_chart

# Deviation vectors whose entries span less than this are treated as all-zero.
# Differences between unit singular vectors below it are rounding noise (e.g.
# cases proportional to baseline).
DEVIATION_ATOL = 1e-9
# Ratio grids whose spread is below this fraction of their largest ratio are
# treated as constant (cases = k * baseline up to the last bit).
RATIO_RTOL = 1e-12

Cell = tuple[int, int]


class Method(str, enum.Enum):
    EIGENSPOT = "eigenspot"
    BASELINE_RATIO = "baseline_ratio"

    @classmethod
    def parse(cls, value: str | Method) -> Method:
        if isinstance(value, Method):
            return value
        if value == "ratio":
            return cls.BASELINE_RATIO
        try:
            return cls(value)
        except ValueError:
            raise EigenSpotError(f"unknown method {value!r}") from None


@dataclass(frozen=True, eq=False)
class HotspotReport:
    """Detected hotspot cells plus the evidence behind them.

    For EigenSpot, ``spatial_chart``/``temporal_chart`` hold the two control
    charts and ``cells`` is exactly ``spatial_components x temporal_components``.
    For the ratio baseline, ``ratio_chart`` holds the chart over the flattened
    (row-major) ratio grid and the component sets are the projections of
    ``cells``.

    ``cell_scores`` maps each reported cell to the smallest alpha at which it
    would still be reported.
    """

    method: Method
    alpha: float
    tail: Tail
    shape: tuple[int, int]
    spatial_components: frozenset[int]
    temporal_components: frozenset[int]
    cells: frozenset[Cell]
    cell_scores: dict[Cell, float]
    spatial_chart: ControlChartResult | None = None
    temporal_chart: ControlChartResult | None = None
    ratio_chart: ControlChartResult | None = None
    baseline_svd: SingularPair | None = None
    cases_svd: SingularPair | None = None

    @property
    def comparison_count(self) -> int:
        """Number of element-level significance tests performed."""
        if self.method is Method.EIGENSPOT:
            return self.spatial_chart.p_values.size + self.temporal_chart.p_values.size
        return self.ratio_chart.p_values.size

    def score_grid(self) -> np.ndarray:
        """Per-cell score for every cell; a cell is reported at alpha iff score < alpha."""
        if self.method is Method.EIGENSPOT:
            return np.maximum.outer(self.spatial_chart.p_values, self.temporal_chart.p_values)
        return self.ratio_chart.p_values.reshape(self.shape)

    def p_value_grid(self) -> np.ndarray:
        return self.score_grid()

    def mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        for i, t in self.cells:
            out[i, t] = True
        return out

    def __bool__(self) -> bool:
        return bool(self.cells)


def _check_shapes(baseline: CountMatrix, cases: CountMatrix) -> None:
    if baseline.shape != cases.shape:
        raise ShapeMismatch(f"baseline is {baseline.shape} but cases is {cases.shape}")


def detect_eigenspot(
    baseline: CountMatrix,
    cases: CountMatrix,
    alpha: float = 0.05,
    tail: Tail | str = Tail.TWO_TAILED,
) -> HotspotReport:
    """Run EigenSpot on a baseline/cases pair.

    Deviations are ``cases - baseline`` for both singular vectors, which
    matters only for one-tailed charts.
    """
    _check_shapes(baseline, cases)
    tail = Tail.parse(tail)
    b = rank1_svd(baseline)
    c = rank1_svd(cases)
    ds = c.spatial - b.spatial
    dt = c.temporal - b.temporal
    s_chart = control_chart(ds, alpha, tail, atol=DEVIATION_ATOL)
    t_chart = control_chart(dt, alpha, tail, atol=DEVIATION_ATOL)
    cells = frozenset((i, t) for i in sorted(s_chart.flagged) for t in sorted(t_chart.flagged))
    scores = {
        (i, t): float(max(s_chart.p_values[i], t_chart.p_values[t])) for i, t in sorted(cells)
    }
    return HotspotReport(
        method=Method.EIGENSPOT,
        alpha=float(alpha),
        tail=tail,
        shape=baseline.shape,
        spatial_components=s_chart.flagged,
        temporal_components=t_chart.flagged,
        cells=cells,
        cell_scores=scores,
        spatial_chart=s_chart,
        temporal_chart=t_chart,
        baseline_svd=b,
        cases_svd=c,
    )


def case_ratios(baseline: CountMatrix, cases: CountMatrix) -> np.ndarray:
    _check_shapes(baseline, cases)
    B = baseline.values
    zero = np.argwhere(B == 0)
    if zero.size:
        i, t = (int(v) for v in zero[0])
        raise ZeroBaselineCell(i, t)
    return cases.values / B


def detect_baseline_method(
    baseline: CountMatrix,
    cases: CountMatrix,
    alpha: float = 0.05,
    tail: Tail | str = Tail.TWO_TAILED,
) -> HotspotReport:
    """Flag cells whose cases/baseline ratio is extreme over the whole grid."""
    tail = Tail.parse(tail)
    ratios = case_ratios(baseline, cases)
    n, m = ratios.shape
    chart = control_chart(ratios.ravel(), alpha, tail, atol=RATIO_RTOL * float(np.abs(ratios).max()))
    cells = frozenset(divmod(k, m) for k in chart.flagged)
    scores = {cell: float(chart.p_values[cell[0] * m + cell[1]]) for cell in sorted(cells)}
    return HotspotReport(
        method=Method.BASELINE_RATIO,
        alpha=float(alpha),
        tail=tail,
        shape=(n, m),
        spatial_components=frozenset(i for i, _ in cells),
        temporal_components=frozenset(t for _, t in cells),
        cells=cells,
        cell_scores=scores,
        ratio_chart=chart,
    )


def detect(
    baseline: CountMatrix,
    cases: CountMatrix,
    alpha: float = 0.05,
    tail: Tail | str = Tail.TWO_TAILED,
    method: Method | str = Method.EIGENSPOT,
) -> HotspotReport:
    if Method.parse(method) is Method.EIGENSPOT:
        return detect_eigenspot(baseline, cases, alpha, tail)
    return detect_baseline_method(baseline, cases, alpha, tail)
