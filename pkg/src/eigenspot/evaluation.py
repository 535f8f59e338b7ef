"""Threshold-swept accuracy evaluation and the multi-replicate study driver.

A detection is scored as a per-cell binary classifier against the simulator's
injection mask. Each dataset is scored at every alpha of a z-threshold grid
(1.28 to 3.00 in steps of 0.01 by default, i.e. 173 two-tailed levels from
about 0.2005 down to 0.0027) and the accuracies are averaged; replicate means
are then averaged per setting.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .detector import HotspotReport, Method, detect
from .errors import EigenSpotError, ShapeMismatch
from .linalg import CountMatrix
from .simulator import (
    DEFAULT_GROWTH,
    SimulatedDataset,
    SimulationConfig,
    generate,
    replicate_seed,
    synthesize_baseline,
)
from .stats import Tail, TestReport, normal_p_value, one_way_anova, paired_t_test

EXTERNAL = "external"


@dataclass(frozen=True)
class SweepSpec:
    z_lo: float = 1.28
    z_hi: float = 3.00
    z_step: float = 0.01
    # tail handed to the detector; thresholds are always two-tailed levels
    tail: Tail = Tail.TWO_TAILED

    def __post_init__(self) -> None:
        if not self.z_lo < self.z_hi:
            raise EigenSpotError(f"z_lo must be below z_hi, got {self.z_lo} >= {self.z_hi}")
        if not self.z_step > 0:
            raise EigenSpotError(f"z_step must be positive, got {self.z_step}")
        object.__setattr__(self, "tail", Tail.parse(self.tail))

    @property
    def count(self) -> int:
        # the epsilon absorbs binary representation error in (hi - lo) / step
        return math.floor((self.z_hi - self.z_lo) / self.z_step + 1e-9) + 1

    def z_values(self) -> np.ndarray:
        return np.array([self.z_lo + k * self.z_step for k in range(self.count)])

    def alphas(self) -> np.ndarray:
        return np.array([normal_p_value(z, Tail.TWO_TAILED) for z in self.z_values()])

    def to_dict(self) -> dict:
        return {"z_lo": self.z_lo, "z_hi": self.z_hi, "z_step": self.z_step, "tail": self.tail.value}


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Accuracy of one method over an alpha sweep.

    ``accuracies[r, k]`` is replicate ``r`` at ``alphas[k]``; ``confusion``
    has shape (replicates, alphas, 4) holding TP, FP, TN, FN.
    """

    method: str
    alphas: np.ndarray
    accuracies: np.ndarray
    confusion: np.ndarray
    setting_echo: dict = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return self.accuracies.shape[0]

    @property
    def replicate_means(self) -> np.ndarray:
        return self.accuracies.mean(axis=1)

    @property
    def mean_accuracy(self) -> float:
        # mean over alpha first, then over replicates
        return float(self.replicate_means.mean())

    @property
    def per_alpha_accuracy(self) -> dict[float, float]:
        col = self.accuracies.mean(axis=0)
        return {float(a): float(x) for a, x in zip(self.alphas, col)}

    @property
    def confusion_totals(self) -> np.ndarray:
        """TP/FP/TN/FN per alpha, summed over replicates."""
        return self.confusion.sum(axis=0)

    @classmethod
    def combine(cls, reports: Sequence[EvaluationReport], setting_echo: dict | None = None) -> EvaluationReport:
        if not reports:
            raise EigenSpotError("nothing to combine")
        first = reports[0]
        return cls(
            method=first.method,
            alphas=first.alphas,
            accuracies=np.vstack([r.accuracies for r in reports]),
            confusion=np.concatenate([r.confusion for r in reports]),
            setting_echo=setting_echo if setting_echo is not None else dict(first.setting_echo),
        )


def confusion(predicted: np.ndarray, mask: np.ndarray) -> tuple[int, int, int, int]:
    predicted = np.asarray(predicted, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if predicted.shape != mask.shape:
        raise ShapeMismatch(f"prediction grid {predicted.shape} vs mask {mask.shape}")
    tp = int(np.count_nonzero(predicted & mask))
    fp = int(np.count_nonzero(predicted & ~mask))
    fn = int(np.count_nonzero(~predicted & mask))
    tn = predicted.size - tp - fp - fn
    return tp, fp, tn, fn


def accuracy(report: HotspotReport | np.ndarray, mask: np.ndarray) -> float:
    """(TP + TN) / (n * m) for a report (or a boolean prediction grid)."""
    predicted = report.mask() if isinstance(report, HotspotReport) else np.asarray(report, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if predicted.shape != mask.shape:
        raise ShapeMismatch(f"report grid {predicted.shape} vs mask {mask.shape}")
    tp, _, tn, _ = confusion(predicted, mask)
    return (tp + tn) / mask.size


def _score_predictions(predictions: Iterable[np.ndarray], mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    conf = np.array([confusion(p, mask) for p in predictions], dtype=np.int64)
    acc = (conf[:, 0] + conf[:, 2]) / mask.size
    return acc, conf


def alpha_sweep(
    baseline: CountMatrix,
    cases: CountMatrix,
    mask: np.ndarray,
    method: Method | str = Method.EIGENSPOT,
    spec: SweepSpec = SweepSpec(),
    setting_echo: dict | None = None,
) -> EvaluationReport:
    """Score one dataset at every alpha of the sweep.

    p-values do not depend on alpha, so the detector runs once and each level
    reuses its score grid; a cell is reported at alpha iff its score < alpha,
    which is exactly what a fresh detection at that alpha reports.
    """
    method = Method.parse(method)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != baseline.shape:
        raise ShapeMismatch(f"mask {mask.shape} vs data {baseline.shape}")
    alphas = spec.alphas()
    report = detect(baseline, cases, float(alphas[0]), spec.tail, method)
    scores = report.score_grid()
    acc, conf = _score_predictions((scores < a for a in alphas), mask)
    return EvaluationReport(method.value, alphas, acc[None, :], conf[None, :, :], dict(setting_echo or {}))


def score_verdicts(
    verdicts: np.ndarray,
    mask: np.ndarray,
    spec: SweepSpec = SweepSpec(),
    method: str = EXTERNAL,
    setting_echo: dict | None = None,
) -> EvaluationReport:
    """Score externally produced per-cell verdicts, shape (alphas, n, m)."""
    verdicts = np.asarray(verdicts, dtype=bool)
    alphas = spec.alphas()
    if verdicts.shape != (alphas.size, *np.shape(mask)):
        raise ShapeMismatch(f"verdicts have shape {verdicts.shape}, expected {(alphas.size, *np.shape(mask))}")
    acc, conf = _score_predictions(verdicts, mask)
    return EvaluationReport(method, alphas, acc[None, :], conf[None, :, :], dict(setting_echo or {}))


# --- study driver ------------------------------------------------------------

# Loader for third-party verdicts: (size, impact, replicate, dataset) -> (alphas, n, m) bools
VerdictLoader = Callable[[int, float, int, SimulatedDataset], np.ndarray]


@dataclass(frozen=True, eq=False)
class StudyRow:
    method: str
    impact: float
    size: int
    report: EvaluationReport

    @property
    def mean_accuracy(self) -> float:
        return self.report.mean_accuracy

    @property
    def stderr(self) -> float:
        means = self.report.replicate_means
        if means.size < 2:
            return 0.0
        return float(np.std(means, ddof=1) / math.sqrt(means.size))


@dataclass(frozen=True, eq=False)
class StudyResult:
    rows: list[StudyRow]
    spec: SweepSpec
    master_seed: int
    replicates: int
    grid_shape: tuple[int, int]

    def row(self, method: str | Method, impact: float, size: int) -> StudyRow:
        name = EXTERNAL if method == EXTERNAL else Method.parse(method).value
        for r in self.rows:
            if r.method == name and r.impact == impact and r.size == size:
                return r
        raise KeyError((name, impact, size))

    def table(self) -> list[dict]:
        return [
            {
                "method": r.method,
                "impact": r.impact,
                "size": r.size,
                "mean_accuracy": r.mean_accuracy,
                "stderr": r.stderr,
            }
            for r in self.rows
        ]

    def detail(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "replicates": self.replicates,
            "grid_shape": list(self.grid_shape),
            "sweep": self.spec.to_dict(),
            "alphas": [float(a) for a in self.spec.alphas()],
            "results": [
                {
                    "method": r.method,
                    "impact": r.impact,
                    "size": r.size,
                    "mean_accuracy": r.mean_accuracy,
                    "stderr": r.stderr,
                    "replicate_means": [float(x) for x in r.report.replicate_means],
                    "replicate_seeds": r.report.setting_echo.get("seeds", []),
                    "per_replicate_per_alpha": r.report.accuracies.tolist(),
                }
                for r in self.rows
            ],
        }

    def compare(self, method_a: str, method_b: str, impact: float | None = None, size: int | None = None) -> TestReport:
        """Paired t-test of per-replicate mean accuracies, pooled over matching settings."""
        a, b = [], []
        for r in self.rows:
            if (impact is not None and r.impact != impact) or (size is not None and r.size != size):
                continue
            if r.method == method_a:
                a.append((r.impact, r.size, r.report.replicate_means))
            elif r.method == method_b:
                b.append((r.impact, r.size, r.report.replicate_means))
        a.sort(key=lambda x: x[:2])
        b.sort(key=lambda x: x[:2])
        if [x[:2] for x in a] != [x[:2] for x in b] or not a:
            raise EigenSpotError(f"methods {method_a!r} and {method_b!r} do not cover the same settings")
        return paired_t_test(np.concatenate([x[2] for x in a]), np.concatenate([x[2] for x in b]))

    def anova(self, method: str, factor: str) -> TestReport:
        """One-way ANOVA of per-replicate means grouped by ``size`` or ``impact``."""
        if factor not in ("size", "impact"):
            raise EigenSpotError(f"factor must be 'size' or 'impact', got {factor!r}")
        groups: dict[float, list[float]] = {}
        for r in self.rows:
            if r.method == method:
                groups.setdefault(getattr(r, factor), []).extend(r.report.replicate_means)
        return one_way_anova([groups[k] for k in sorted(groups)])


def _replicate_task(args: tuple) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    baseline, n, m, growth, size, impact, seed, methods, spec = args
    config = SimulationConfig(
        n_regions=n,
        n_periods=m,
        growth_rate=growth,
        hotspot_size=size,
        hotspot_impact=impact,
        seed=seed,
        baseline_source=baseline,
    )
    data = generate(config, baseline)
    out = {}
    for method in methods:
        rep = alpha_sweep(data.baseline, data.cases, data.injection_mask, method, spec)
        out[method] = (rep.accuracies[0], rep.confusion[0])
    return out


def study_dataset(
    baseline: CountMatrix, size: int, impact: float, master_seed: int, replicate: int, growth: float = DEFAULT_GROWTH
) -> SimulatedDataset:
    """The exact dataset :func:`run_study` scores for (size, impact, replicate)."""
    n, m = baseline.shape
    config = SimulationConfig(
        n_regions=n,
        n_periods=m,
        growth_rate=growth,
        hotspot_size=size,
        hotspot_impact=impact,
        seed=replicate_seed(master_seed, replicate),
        baseline_source=baseline,
    )
    return generate(config, baseline)


def study_baseline(n_regions: int, n_periods: int, master_seed: int, growth: float = DEFAULT_GROWTH) -> CountMatrix:
    """Synthetic baseline shared by every dataset of a study (seeded by the master seed)."""
    return synthesize_baseline(n_regions, n_periods, growth, seed=master_seed)


def run_study(
    settings: Sequence[tuple[int, float]],
    replicates: int = 100,
    master_seed: int = 0,
    methods: Sequence[Method | str] = (Method.EIGENSPOT, Method.BASELINE_RATIO),
    spec: SweepSpec = SweepSpec(),
    baseline: CountMatrix | None = None,
    n_regions: int = 32,
    n_periods: int = 19,
    growth: float = DEFAULT_GROWTH,
    jobs: int = 1,
    external: VerdictLoader | None = None,
    replicate_order: Sequence[int] | None = None,
    progress: Callable[[str], None] | None = None,
) -> StudyResult:
    """Generate ``replicates`` datasets per (size, impact) setting and sweep each method.

    Replicate ``r`` of every setting uses seed ``replicate_seed(master_seed, r)``,
    so results do not depend on execution order or ``jobs``.
    """
    if replicates < 1:
        raise EigenSpotError(f"replicates must be >= 1, got {replicates}")
    if baseline is None:
        baseline = study_baseline(n_regions, n_periods, master_seed, growth)
    n, m = baseline.shape
    method_names = [Method.parse(x).value for x in methods]
    order = list(range(replicates)) if replicate_order is None else list(replicate_order)
    if sorted(order) != list(range(replicates)):
        raise EigenSpotError("replicate_order must be a permutation of range(replicates)")
    seeds = [replicate_seed(master_seed, r) for r in range(replicates)]

    tasks = []
    keys = []
    for size, impact in settings:
        for r in order:
            keys.append((size, impact, r))
            tasks.append((baseline, n, m, growth, size, impact, seeds[r], method_names, spec))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        outputs = []
        for i, t in enumerate(tasks):
            outputs.append(_replicate_task(t))
            if progress and (i + 1) % max(1, replicates) == 0:
                progress(f"{i + 1}/{len(tasks)} datasets")
    results = dict(zip(keys, outputs))

    alphas = spec.alphas()
    rows = []
    for size, impact in settings:
        echo = {"size": size, "impact": impact, "grid_shape": [n, m], "seeds": seeds}
        for name in method_names:
            acc = np.vstack([results[(size, impact, r)][name][0] for r in range(replicates)])
            conf = np.stack([results[(size, impact, r)][name][1] for r in range(replicates)])
            rows.append(StudyRow(name, impact, size, EvaluationReport(name, alphas, acc, conf, echo)))
        if external is not None:
            reps = []
            for r in range(replicates):
                data = study_dataset(baseline, size, impact, master_seed, r, growth)
                reps.append(score_verdicts(external(size, impact, r, data), data.injection_mask, spec))
            rows.append(StudyRow(EXTERNAL, impact, size, EvaluationReport.combine(reps, echo)))
    return StudyResult(rows, spec, master_seed, replicates, (n, m))
