import math

import mpmath
import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenspot.errors import EigenSpotError, LengthMismatch, TooFewGroups, TooShort, ZeroVariance, ZeroWithinVariance
from eigenspot.stats import (
    Tail,
    betainc,
    control_chart,
    f_sf,
    is_degenerate,
    normal_p_value,
    normal_p_values,
    one_way_anova,
    paired_t_test,
    standardize,
    t_sf_two_tailed,
)

WORKED_DS = [-0.05, -0.80, -0.05, 0.05]
WORKED_Z = [0.4119, -1.4893, 0.4119, 0.6654]

finite_vectors = st.lists(st.floats(-1e6, 1e6, allow_subnormal=False), min_size=2, max_size=40)


@pytest.fixture(scope="module")
def phi_reference():
    """Phi on [-8, 8] step 0.01 by arbitrary-precision quadrature of the density.

    Integrates the density over each 0.01 step outward from 0 and accumulates.
    """
    mpmath.mp.dps = 30
    density = lambda x: mpmath.exp(-x * x / 2) / mpmath.sqrt(2 * mpmath.pi)  # noqa: E731
    ref = {0: mpmath.mpf(1) / 2}
    upper = lower = mpmath.mpf(1) / 2
    for k in range(1, 801):
        piece = mpmath.quad(density, [mpmath.mpf(k - 1) / 100, mpmath.mpf(k) / 100])
        upper += piece
        lower -= piece  # symmetric density
        ref[k], ref[-k] = upper, lower
    ks = range(-800, 801)
    return np.array([k / 100 for k in ks]), np.array([float(ref[k]) for k in ks])


class TestStandardize:
    def test_worked_example(self):
        np.testing.assert_allclose(standardize(WORKED_DS), WORKED_Z, atol=1e-4)

    def test_population_std_does_not_reproduce_example(self):
        d = np.array(WORKED_DS)
        pop = (d - d.mean()) / d.std(ddof=0)
        assert np.max(np.abs(pop - WORKED_Z)) > 1e-2

    def test_constant(self):
        np.testing.assert_array_equal(standardize([5, 5, 5]), [0, 0, 0])
        assert is_degenerate([5, 5, 5])

    def test_moments(self):
        x = np.random.default_rng(3).normal(7, 3, size=100)
        z = standardize(x)
        assert abs(z.mean()) < 1e-12
        assert abs(np.std(z, ddof=1) - 1) < 1e-12

    def test_too_short(self):
        with pytest.raises(TooShort):
            standardize([1.0])


class TestNormalPValue:
    def test_sweep_endpoints(self):
        assert normal_p_value(1.28, "two_tailed") == pytest.approx(0.2005, abs=5e-4)
        assert normal_p_value(3.00, "two_tailed") == pytest.approx(0.0027, abs=5e-4)

    def test_center(self):
        assert normal_p_value(0.0) == 1.0

    def test_worked_left_tail(self):
        assert normal_p_value(-1.4893, Tail.LEFT_TAILED) == pytest.approx(0.0682, abs=1e-3)

    def test_accuracy_against_quadrature(self, phi_reference):
        zs, ref = phi_reference
        got = np.array([normal_p_value(z, Tail.LEFT_TAILED) for z in zs])
        assert np.max(np.abs(got - ref)) < 1e-9
        np.testing.assert_allclose(normal_p_values(zs, Tail.LEFT_TAILED), got, rtol=0, atol=0)

    @given(st.floats(-30, 30))
    def test_symmetry(self, z):
        assert normal_p_value(z, "two") == normal_p_value(-z, "two")
        assert abs(normal_p_value(z, "left") + normal_p_value(z, "right") - 1) <= 1e-12

    def test_non_finite(self):
        with pytest.raises(EigenSpotError):
            normal_p_value(float("inf"))


class TestControlChart:
    def test_worked_example_alpha_010(self):
        r = control_chart(WORKED_DS, 0.10, Tail.LEFT_TAILED)
        assert r.flagged == {1}

    def test_worked_example_alpha_005(self):
        assert control_chart(WORKED_DS, 0.05, Tail.LEFT_TAILED).flagged == set()

    def test_default_is_two_tailed(self):
        r = control_chart(WORKED_DS, 0.2)
        assert r.tail is Tail.TWO_TAILED
        assert r.p_values[1] == pytest.approx(2 * normal_p_value(-1.48925, "left"), abs=1e-4)

    def test_constant_vector(self):
        r = control_chart([0.3] * 6, 0.2)
        assert r.degenerate and r.flagged == set()
        np.testing.assert_array_equal(r.p_values, 1.0)

    def test_atol_absorbs_noise(self):
        r = control_chart([1e-17, -2e-17, 0.0], 0.5, atol=1e-12)
        assert r.degenerate and not r.flagged

    def test_bad_alpha(self):
        with pytest.raises(EigenSpotError):
            control_chart([1, 2, 3], 1.0)

    @settings(max_examples=200, deadline=None)
    @given(finite_vectors, st.floats(0.001, 0.5), st.floats(0.001, 0.5), st.sampled_from(list(Tail)))
    def test_flag_monotonicity(self, x, a1, a2, tail):
        lo, hi = sorted((a1, a2))
        assert control_chart(x, lo, tail).flagged <= control_chart(x, hi, tail).flagged

    @settings(max_examples=200, deadline=None)
    @given(finite_vectors, st.floats(0.01, 100), st.floats(-100, 100), st.floats(0.001, 0.5))
    def test_affine_invariance(self, x, a, b, alpha):
        x = np.array(x)
        if np.ptp(x) < 1e-3 * max(1.0, np.abs(x).max()):
            return  # near-constant vectors are dominated by rounding
        r1 = control_chart(x, alpha)
        r2 = control_chart(a * x + b, alpha)
        # flags agree except where a p-value sits on the threshold within rounding
        close = np.isclose(r1.p_values, alpha, rtol=1e-9, atol=1e-12)
        for i in range(len(x)):
            if not close[i]:
                assert (i in r1.flagged) == (i in r2.flagged)

    @settings(max_examples=100, deadline=None)
    @given(finite_vectors, st.floats(0.001, 0.9))
    def test_invariants(self, x, alpha):
        r = control_chart(x, alpha)
        assert r.flagged == {i for i, p in enumerate(r.p_values) if p < alpha}
        assert np.all((r.p_values >= 0) & (r.p_values <= 1))
        if not r.degenerate:
            assert abs(r.z_scores.mean()) < 1e-9
            assert abs(np.std(r.z_scores, ddof=1) - 1) < 1e-9


class TestBetaTails:
    @pytest.mark.parametrize("a,b", [(0.5, 0.5), (1, 3), (2.5, 0.5), (10, 40), (150, 0.5), (0.3, 200)])
    def test_betainc_against_mpmath(self, a, b):
        for x in np.linspace(0.001, 0.999, 41):
            ref = float(mpmath.betainc(a, b, 0, x, regularized=True))
            assert abs(betainc(a, b, x) - ref) < 1e-8

    @pytest.mark.parametrize("dof", [1, 2, 3, 5, 10, 30, 99, 1000])
    def test_t_tail_against_scipy(self, dof):
        for t in [0.0, 0.1, 0.77, 1.5, 2.0, 3.3, 7.0, 40.0, -2.5]:
            assert abs(t_sf_two_tailed(t, dof) - 2 * scipy.stats.t.sf(abs(t), dof)) < 1e-8

    @pytest.mark.parametrize("d1,d2", [(1, 1), (1, 4), (2, 12), (4, 495), (9, 990), (14, 1485)])
    def test_f_tail_against_scipy(self, d1, d2):
        for f in [0.0, 0.2, 1.0, 2.5, 6.0, 40.0, 2400.0]:
            assert abs(f_sf(f, d1, d2) - scipy.stats.f.sf(f, d1, d2)) < 1e-8


class TestPairedT:
    def test_identical_samples(self):
        with pytest.raises(ZeroVariance):
            paired_t_test([1, 2, 3], [1, 2, 3])

    def test_constant_shift_is_zero_variance(self):
        with pytest.raises(ZeroVariance):
            paired_t_test([1, 2, 3, 4], [0, 1, 2, 3])

    def test_hand_expanded(self):
        # d = [0.1, 0, 0.2, -0.1], mean 0.05, s^2 = 0.05/3, t = 0.05 / (s/2) = 0.1*sqrt(60)
        r = paired_t_test([1.1, 2.0, 3.2, 3.9], [1, 2, 3, 4])
        assert r.statistic == pytest.approx(0.1 * math.sqrt(60), rel=1e-12)
        assert r.dof == (3,)
        assert r.p_value == pytest.approx(scipy.stats.ttest_rel([1.1, 2.0, 3.2, 3.9], [1, 2, 3, 4]).pvalue, abs=1e-10)

    def test_p_decreases_with_noise(self):
        a = np.array([2.0, 4.0, 6.0])
        pattern = np.array([1.0, -1.0, 0.5])
        ps = []
        for eps in [0.5, 0.1, 0.01, 0.001]:
            b = np.array([1.0, 3.0, 5.0]) - eps * pattern
            ps.append(paired_t_test(a, b).p_value)
        assert all(p1 > p2 for p1, p2 in zip(ps, ps[1:]))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            paired_t_test([1, 2], [1, 2, 3])


class TestAnova:
    def test_identical_groups(self):
        r = one_way_anova([[1, 2, 3]] * 3)
        assert r.statistic == 0.0 and r.p_value == 1.0 and r.dof == (2, 6)

    def test_separated_groups(self):
        # SSB = 24, SSW = 0.04, dof (1, 4) -> F = 24 / 0.01 = 2400
        r = one_way_anova([[1, 1.1, 0.9], [5, 5.1, 4.9]])
        assert r.statistic == pytest.approx(2400.0, rel=1e-9)
        assert r.p_value < 0.01

    def test_against_scipy(self):
        rng = np.random.default_rng(11)
        groups = [rng.normal(size=n) + shift for n, shift in [(5, 0), (8, 0.4), (6, 1.0)]]
        r = one_way_anova(groups)
        ref = scipy.stats.f_oneway(*groups)
        assert r.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert abs(r.p_value - ref.pvalue) < 1e-10

    def test_null_calibration(self):
        rng = np.random.default_rng(2024)
        ps = np.sort([one_way_anova([rng.normal(size=6) for _ in range(3)]).p_value for _ in range(1000)])
        n = ps.size
        ks = max(np.max(np.arange(1, n + 1) / n - ps), np.max(ps - np.arange(n) / n))
        assert ks < 0.05

    def test_errors(self):
        with pytest.raises(TooFewGroups):
            one_way_anova([[1, 2]])
        with pytest.raises(TooShort):
            one_way_anova([[1, 2], [3]])
        with pytest.raises(ZeroWithinVariance):
            one_way_anova([[1, 1], [2, 2]])
