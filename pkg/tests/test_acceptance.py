"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``. Thresholds here
are the contract values and must not be loosened to make a run green.
"""

import time

import numpy as np
import pytest

from eigenspot.detector import Method, detect, detect_baseline_method, detect_eigenspot
from eigenspot.evaluation import SweepSpec, run_study, study_baseline
from eigenspot.linalg import CountMatrix, rank1_svd, svd_oracle
from eigenspot.simulator import SimulationConfig, generate, replicate_seed
from eigenspot.stats import Tail, control_chart, standardize

from conftest import chi_square_p, pmf_within_standard_errors, poisson_draws


@pytest.fixture
def verdict(capsys):
    """Print one criterion line to the terminal regardless of capture."""

    def report(number: int, ok: bool, detail: str) -> bool:
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return report


def test_criterion_1_worked_example(verdict):
    t0 = time.perf_counter()
    ds = [-0.05, -0.80, -0.05, 0.05]
    z = standardize(ds)
    err = float(np.max(np.abs(z - np.array([0.4119, -1.4893, 0.4119, 0.6654]))))
    at10 = control_chart(ds, 0.10, Tail.LEFT_TAILED).flagged
    at05 = control_chart(ds, 0.05, Tail.LEFT_TAILED).flagged
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-4 and at10 == {1} and at05 == set() and elapsed < 1.0
    assert verdict(1, ok, f"max z error {err:.2e}, flags@0.10={set(at10)}, flags@0.05={set(at05)}, {elapsed * 1e3:.1f} ms")


def test_criterion_2_threshold_grid(verdict):
    t0 = time.perf_counter()
    alphas = SweepSpec().alphas()
    elapsed = time.perf_counter() - t0
    ok = alphas.size == 173 and abs(alphas[0] - 0.2005) <= 5e-4 and abs(alphas[-1] - 0.0027) <= 5e-4 and elapsed < 1.0
    assert verdict(2, ok, f"{alphas.size} thresholds, first {alphas[0]:.4f}, last {alphas[-1]:.4f}")


def test_criterion_3_svd_oracle(verdict):
    rng = np.random.default_rng(20240603)
    t0 = time.perf_counter()
    worst_sigma = worst_u = worst_v = 0.0
    for _ in range(500):
        n, m = (int(x) for x in rng.integers(1, 21, size=2))
        M = rng.uniform(0, 100, size=(n, m))
        if rng.random() < 0.3:
            M[rng.random((n, m)) < 0.5] = 0.0  # sparse count-like grids
        if not M.any():
            M[0, 0] = 1.0
        p, o = rank1_svd(M), svd_oracle(M)
        worst_sigma = max(worst_sigma, abs(p.sigma - o.sigma) / o.sigma)
        worst_u = max(worst_u, 1 - abs(float(p.spatial @ o.spatial)))
        worst_v = max(worst_v, 1 - abs(float(p.temporal @ o.temporal)))
    elapsed = time.perf_counter() - t0
    ok = worst_sigma <= 1e-8 and worst_u <= 1e-8 and worst_v <= 1e-8 and elapsed < 10
    assert verdict(
        3, ok, f"max rel sigma err {worst_sigma:.1e}, max 1-|<u,u'>| {max(worst_u, worst_v):.1e}, {elapsed:.2f} s"
    )


def test_criterion_4_desk_scale_study(verdict):
    t0 = time.perf_counter()
    res = run_study([(3, 2.5)], replicates=100, master_seed=0)
    elapsed = time.perf_counter() - t0
    eig = res.row(Method.EIGENSPOT, 2.5, 3).mean_accuracy
    base = res.row(Method.BASELINE_RATIO, 2.5, 3).mean_accuracy
    p = res.compare("eigenspot", "baseline_ratio").p_value
    checks = {
        "eigenspot>=0.90": eig >= 0.90,
        "ratio<=0.85": base <= 0.85,
        "gap>=0.10": eig - base >= 0.10,
        "t-test p<0.01": p < 0.01,
        "runtime<120s": elapsed < 120,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = f"eigenspot {eig:.4f}, ratio {base:.4f}, gap {eig - base:.4f}, p={p:.2e}, {elapsed:.1f} s"
    if failed:
        detail += f"; unmet: {', '.join(failed)}"
    assert verdict(4, not failed, detail)


def test_criterion_5_null_calibration(verdict):
    t0 = time.perf_counter()
    baseline = study_baseline(32, 19, 0)
    alarms = 0
    for r in range(500):
        config = SimulationConfig(32, 19, hotspot_size=0, seed=replicate_seed(0, r))
        data = generate(config, baseline)
        alarms += bool(detect_eigenspot(data.baseline, data.cases, 0.05, Tail.TWO_TAILED))
    elapsed = time.perf_counter() - t0
    rate = alarms / 500
    ok = rate <= 0.25 and elapsed < 60
    assert verdict(5, ok, f"false-alarm rate {rate:.3f} (bound 0.25), {elapsed:.1f} s")


def _pair(rng, n, m):
    B = rng.uniform(100, 1000, size=(n, m))
    C = rng.poisson(B / 50).astype(float) + rng.integers(0, 5, size=(n, m))
    C[0, 0] += 1
    return B, C


def test_criterion_6_invariants(verdict):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    problems = []
    for trial in range(200):
        n, m = (int(x) for x in rng.integers(3, 25, size=2))
        B, C = _pair(rng, n, m)
        alpha = float(rng.uniform(0.01, 0.3))
        method = (Method.EIGENSPOT, Method.BASELINE_RATIO)[trial % 2]
        ref = detect(CountMatrix(B), CountMatrix(C), alpha, method=method)

        k1, k2 = (float(x) for x in 10 ** rng.uniform(-2, 2, size=2))
        scaled = detect_eigenspot(CountMatrix(k1 * B), CountMatrix(k2 * C), alpha)
        plain = ref if method is Method.EIGENSPOT else detect_eigenspot(CountMatrix(B), CountMatrix(C), alpha)
        if (scaled.spatial_components, scaled.temporal_components) != (plain.spatial_components, plain.temporal_components):
            problems.append(f"scaling (trial {trial})")

        pr, pc = rng.permutation(n), rng.permutation(m)
        perm = detect(CountMatrix(B[pr][:, pc]), CountMatrix(C[pr][:, pc]), alpha, method=method)
        if {(int(pr[i]), int(pc[t])) for i, t in perm.cells} != set(ref.cells) or {
            int(pr[i]) for i in perm.spatial_components
        } != set(ref.spatial_components):
            problems.append(f"permutation (trial {trial})")

        alpha2 = float(rng.uniform(alpha, 0.5))
        if not ref.cells <= detect(CountMatrix(B), CountMatrix(C), alpha2, method=method).cells:
            problems.append(f"alpha monotonicity (trial {trial})")

        if method is Method.EIGENSPOT:
            if len(ref.cells) != len(ref.spatial_components) * len(ref.temporal_components):
                problems.append(f"cross product (trial {trial})")
            if ref.comparison_count != n + m:
                problems.append(f"eigenspot comparisons (trial {trial})")
        elif ref.comparison_count != n * m:
            problems.append(f"ratio comparisons (trial {trial})")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 30
    assert verdict(6, ok, f"200 seeded trials, {len(problems)} violations, {elapsed:.1f} s" + (f": {problems[:3]}" if problems else ""))


def test_criterion_7_poisson_exactness(verdict):
    t0 = time.perf_counter()
    results = {
        "0.5 pmf(k<=6)": pmf_within_standard_errors(poisson_draws(0.5, 10**6, 70), 0.5, 6),
        "4 pmf(k<=12)": pmf_within_standard_errors(poisson_draws(4.0, 10**6, 71), 4.0, 12),
    }
    p25 = chi_square_p(poisson_draws(25.0, 2 * 10**5, 72), 25.0)
    p250 = chi_square_p(poisson_draws(250.0, 10**5, 73), 250.0)
    results["25 chi2"] = p25 > 0.01
    results["250 chi2"] = p250 > 0.01
    elapsed = time.perf_counter() - t0
    ok = all(results.values()) and elapsed < 30
    assert verdict(7, ok, f"{results}, chi2 p(25)={p25:.3f}, p(250)={p250:.3f}, {elapsed:.1f} s")


def test_criterion_8_complexity(verdict):
    rng = np.random.default_rng(8)

    def best_time(N):
        B = CountMatrix(rng.uniform(100, 1000, size=(N, N)))
        C = CountMatrix(rng.poisson(B.values / 50).astype(float) + 1)
        best = float("inf")
        for _ in range(5):
            t = time.perf_counter()
            detect_eigenspot(B, C)
            best = min(best, time.perf_counter() - t)
        return best

    t0 = time.perf_counter()
    times = {N: best_time(N) for N in (250, 500, 1000, 2000)}
    ratios = {N: times[2 * N] / times[N] for N in (250, 500, 1000)}
    elapsed = time.perf_counter() - t0
    ok = all(r <= 6 for r in ratios.values()) and elapsed < 60
    detail = ", ".join(f"t({2 * N})/t({N})={r:.2f}" for N, r in ratios.items())
    assert verdict(8, ok, f"{detail}, {elapsed:.1f} s")
