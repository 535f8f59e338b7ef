import numpy as np
import pytest

from eigenspot.linalg import CountMatrix


def random_counts(rng: np.random.Generator, n: int, m: int, scale: float = 100.0) -> CountMatrix:
    return CountMatrix(rng.uniform(0.0, scale, size=(n, m)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def poisson_draws(lam: float, count: int, seed: int) -> np.ndarray:
    from eigenspot.simulator import RandomStream, sample_poisson

    stream = RandomStream(seed)
    return np.array([sample_poisson(lam, stream) for _ in range(count)])


def poisson_pmf(lam: float, k: np.ndarray) -> np.ndarray:
    """Exact pmf via log-space evaluation (independent of the sampler)."""
    from math import lgamma, log

    return np.exp([-lam + int(j) * log(lam) - lgamma(int(j) + 1) for j in k])


def pmf_within_standard_errors(draws: np.ndarray, lam: float, kmax: int, width: float = 3.0) -> bool:
    """Empirical P(X=k) within ``width`` binomial standard errors for k <= kmax."""
    k = np.arange(kmax + 1)
    p = poisson_pmf(lam, k)
    emp = np.bincount(draws, minlength=kmax + 1)[: kmax + 1] / draws.size
    se = np.sqrt(p * (1 - p) / draws.size)
    return bool(np.all(np.abs(emp - p) <= width * se))


def chi_square_p(draws: np.ndarray, lam: float, min_expected: float = 5.0) -> float:
    """Goodness-of-fit p-value with tail bins pooled until each expects >= min_expected."""
    import scipy.stats

    n = draws.size
    lo, hi = int(draws.min()), int(draws.max())
    k = np.arange(lo, hi + 1)
    expected = poisson_pmf(lam, k) * n
    expected[0] += scipy.stats.poisson.cdf(lo - 1, lam) * n
    expected[-1] += scipy.stats.poisson.sf(hi, lam) * n
    observed = np.bincount(draws - lo, minlength=k.size).astype(float)
    bins_o, bins_e, acc_o, acc_e = [], [], 0.0, 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
            acc_o = acc_e = 0.0
    bins_o[-1] += acc_o
    bins_e[-1] += acc_e
    stat = sum((o - e) ** 2 / e for o, e in zip(bins_o, bins_e))
    return float(scipy.stats.chi2.sf(stat, len(bins_o) - 1))
