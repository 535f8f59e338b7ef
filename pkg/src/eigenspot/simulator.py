"""Semi-realistic dataset generation: Poisson cases over a baseline grid with
an optional H x H hotspot window multiplied by an impact factor.

Reproducibility contract
------------------------
All randomness comes from :class:`RandomStream`: numpy's PCG64 bit generator
seeded through ``numpy.random.SeedSequence(seed)``. Only the raw 64-bit
outputs are used; each is mapped to a double in the open interval (0, 1) as
``((x >> 11) + 0.5) / 2**53``. numpy guarantees the PCG64 raw stream across
versions and platforms, and the mapping is ours, so datasets are
bit-reproducible.

:func:`generate` consumes the stream in this order: one Poisson draw per
cell in row-major order (region-major, period-minor), then, only when the
hotspot origin is ``"random"`` and ``H >= 1``, one uniform for the origin
region and one for the origin period. Cells outside the hotspot window are
therefore identical to an ``H = 0`` run with the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Union

import numpy as np

from .errors import ConfigError, EmptyFirstPeriod, NonPositiveLambda
from .linalg import CountMatrix

DEFAULT_GROWTH = 0.012
_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53
_INVERSION_LIMIT = 30.0


def splitmix64(x: int) -> int:
    """SplitMix64 output function (Steele, Lea & Flood)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def replicate_seed(master_seed: int, replicate: int) -> int:
    """Seed for replicate ``r``: ``splitmix64(master ^ splitmix64(r))``.

    Depends only on the pair, so replicates can run in any order or in
    parallel.
    """
    return splitmix64((master_seed & _MASK64) ^ splitmix64(replicate))


class RandomStream:
    """Uniform doubles in (0, 1) from a seeded PCG64 raw stream."""

    _CHUNK = 4096

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._bitgen = np.random.PCG64(seed)
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        if self._pos == len(self._buf):
            raw = self._bitgen.random_raw(self._CHUNK)
            self._buf = (((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _poisson_inversion(lam: float, stream: RandomStream) -> int:
    u = stream.uniform()
    k = 0
    p = math.exp(-lam)
    cdf = p
    while u > cdf:
        k += 1
        p *= lam / k
        if p == 0.0:
            break
        cdf += p
    return k


def _poisson_ptrs(lam: float, stream: RandomStream) -> int:
    # Hormann (1993) transformed rejection with squeeze, valid for lam >= 10
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        U = stream.uniform() - 0.5
        V = stream.uniform()
        us = 0.5 - abs(U)
        k = math.floor((2.0 * a / us + b) * U + lam + 0.43)
        if us >= 0.07 and V <= vr:
            return k
        if k < 0 or (us < 0.013 and V > us):
            continue
        if (
            math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b)
            <= -lam + k * loglam - math.lgamma(k + 1)
        ):
            return k


def sample_poisson(lam: float, stream: RandomStream) -> int:
    """One exact Poisson(lam) variate.

    Inversion by sequential search (one uniform) below lam = 30; PTRS
    transformed rejection (two uniforms per attempt) at or above it.
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise NonPositiveLambda(f"Poisson rate must be positive and finite, got {lam}")
    if lam < _INVERSION_LIMIT:
        return _poisson_inversion(lam, stream)
    return _poisson_ptrs(lam, stream)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def estimate_lambda(baseline: CountMatrix) -> float:
    """Poisson MLE of the first-period counts: their arithmetic mean."""
    first = baseline.values[:, 0]
    if not np.any(first > 0):
        raise EmptyFirstPeriod("first period has no positive counts")
    return float(np.mean(first))


def synthesize_baseline(
    n_regions: int,
    n_periods: int,
    growth_rate: float = DEFAULT_GROWTH,
    seed: int = 0,
    pop_min: float = 1e3,
    pop_max: float = 1e6,
) -> CountMatrix:
    """Synthetic population grid.

    Region scales are log-uniform on ``[pop_min, pop_max]`` (one uniform per
    region, in order), grown geometrically per period and rounded to integers.
    """
    if n_regions < 1 or n_periods < 1:
        raise ConfigError(f"dimensions must be positive, got {n_regions}x{n_periods}")
    if not 0 < pop_min <= pop_max:
        raise ConfigError(f"need 0 < pop_min <= pop_max, got {pop_min}, {pop_max}")
    if not growth_rate > -1:
        raise ConfigError(f"growth_rate must exceed -1, got {growth_rate}")
    stream = RandomStream(seed)
    log_lo = math.log(pop_min)
    log_span = math.log(pop_max) - log_lo
    scales = np.array([math.exp(log_lo + log_span * stream.uniform()) for _ in range(n_regions)])
    growth = (1.0 + growth_rate) ** np.arange(n_periods)
    values = round_half_away(np.outer(scales, growth))
    return CountMatrix(
        values,
        region_labels=tuple(f"R{i + 1}" for i in range(n_regions)),
        period_labels=tuple(f"T{t + 1}" for t in range(n_periods)),
    )


@dataclass(frozen=True)
class SyntheticBaseline:
    """Parameters for :func:`synthesize_baseline` (growth comes from the config)."""

    seed: int = 0
    pop_min: float = 1e3
    pop_max: float = 1e6


Origin = Union[tuple[int, int], Literal["random"]]


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    n_regions: int
    n_periods: int
    growth_rate: float = DEFAULT_GROWTH
    hotspot_size: int = 0
    hotspot_impact: float = 1.0
    hotspot_origin: Origin = "random"
    seed: int = 0
    baseline_source: CountMatrix | SyntheticBaseline = field(default_factory=SyntheticBaseline)
    # one rate per region from its own first-period baseline, instead of one global rate
    per_region_lambda: bool = False

    def __post_init__(self) -> None:
        n, m, H = self.n_regions, self.n_periods, self.hotspot_size
        if n < 1 or m < 1:
            raise ConfigError(f"grid must be at least 1x1, got {n}x{m}")
        if not self.growth_rate > -1:
            raise ConfigError(f"growth_rate must exceed -1, got {self.growth_rate}")
        if not self.hotspot_impact >= 1:
            raise ConfigError(f"hotspot impact must be >= 1, got {self.hotspot_impact}")
        if H < 0:
            raise ConfigError(f"hotspot size must be >= 0, got {H}")
        if H > n or H > m:
            raise ConfigError(f"hotspot size {H} does not fit a {n}x{m} grid")
        if not 0 <= self.seed <= _MASK64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.hotspot_origin != "random":
            r, t = self.hotspot_origin
            if H >= 1 and not (0 <= r <= n - H and 0 <= t <= m - H):
                raise ConfigError(
                    f"hotspot window at origin ({r}, {t}) with size {H} leaves the {n}x{m} grid"
                )
            object.__setattr__(self, "hotspot_origin", (int(r), int(t)))
        if isinstance(self.baseline_source, CountMatrix) and self.baseline_source.shape != (n, m):
            raise ConfigError(
                f"baseline shape {self.baseline_source.shape} does not match grid {n}x{m}"
            )

    def with_(self, **changes) -> SimulationConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        src = self.baseline_source
        if isinstance(src, SyntheticBaseline):
            baseline = {"kind": "synthetic", "seed": src.seed, "pop_min": src.pop_min, "pop_max": src.pop_max}
        else:
            baseline = {"kind": "external"}
        return {
            "n_regions": self.n_regions,
            "n_periods": self.n_periods,
            "growth_rate": self.growth_rate,
            "hotspot_size": self.hotspot_size,
            "hotspot_impact": self.hotspot_impact,
            "hotspot_origin": self.hotspot_origin if self.hotspot_origin == "random" else list(self.hotspot_origin),
            "seed": self.seed,
            "baseline_source": baseline,
            "per_region_lambda": self.per_region_lambda,
        }


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    baseline: CountMatrix
    cases: CountMatrix
    injection_mask: np.ndarray
    config_echo: SimulationConfig
    origin: tuple[int, int] | None
    lam: float
    # cases before the impact multiplication; kept for mask-consistency checks
    raw_cases: np.ndarray


def resolve_baseline(config: SimulationConfig) -> CountMatrix:
    src = config.baseline_source
    if isinstance(src, CountMatrix):
        return src
    return synthesize_baseline(
        config.n_regions, config.n_periods, config.growth_rate, src.seed, src.pop_min, src.pop_max
    )


def generate(config: SimulationConfig, baseline: CountMatrix | None = None) -> SimulatedDataset:
    """Draw one dataset. ``baseline`` short-circuits re-synthesizing a known grid."""
    if baseline is None:
        baseline = resolve_baseline(config)
    elif baseline.shape != (config.n_regions, config.n_periods):
        raise ConfigError(f"baseline shape {baseline.shape} does not match the config grid")
    n, m, H = config.n_regions, config.n_periods, config.hotspot_size
    lam = estimate_lambda(baseline)
    growth = (1.0 + config.growth_rate) ** np.arange(m)
    if config.per_region_lambda:
        rates = np.outer(baseline.values[:, 0], growth)
    else:
        rates = np.broadcast_to(lam * growth, (n, m))

    stream = RandomStream(config.seed)
    raw = np.zeros((n, m))
    for i in range(n):
        for t in range(m):
            rate = float(rates[i, t])
            # zero-rate regions (per-region mode only) consume nothing
            raw[i, t] = sample_poisson(rate, stream) if rate > 0 else 0.0

    mask = np.zeros((n, m), dtype=bool)
    origin: tuple[int, int] | None = None
    if H >= 1:
        if config.hotspot_origin == "random":
            r0 = min(int(stream.uniform() * (n - H + 1)), n - H)
            t0 = min(int(stream.uniform() * (m - H + 1)), m - H)
            origin = (r0, t0)
        else:
            origin = config.hotspot_origin
        mask[origin[0] : origin[0] + H, origin[1] : origin[1] + H] = True

    cases = raw.copy()
    cases[mask] = round_half_away(raw[mask] * config.hotspot_impact)
    mask.setflags(write=False)
    raw.setflags(write=False)
    return SimulatedDataset(
        baseline=baseline,
        cases=baseline.with_values(cases),
        injection_mask=mask,
        config_echo=config,
        origin=origin,
        lam=lam,
        raw_cases=raw,
    )
