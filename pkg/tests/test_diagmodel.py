import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gibbs_nsho import diagmodel as dm
from gibbs_nsho.errors import NonPositiveTime, SpectralBoundViolated


def brute_norm(alpha, q, t, n_max=200_000):
    n = np.arange(1, n_max + 1, dtype=float)
    terms = n ** alpha * np.exp(-t * n)
    if math.isinf(q):
        return terms.max()
    return np.sum(terms**q) ** (1 / q)


class TestTraceNorm:
    def test_values(self):
        assert dm.trace_norm_semigroup(1.0) == pytest.approx(0.5819767, abs=1e-7)
        assert dm.trace_norm_semigroup(0.1) == pytest.approx(math.exp(-0.1) / (1 - math.exp(-0.1)), rel=1e-14)
        assert dm.trace_norm_semigroup(0.1) == pytest.approx(9.5083, abs=1e-4)

    def test_truncated_sum_with_tail(self):
        for t in (0.05, 0.3, 2.0):
            n_terms = 200
            partial = np.exp(-t * np.arange(1, n_terms + 1)).sum()
            tail = math.exp(-(n_terms + 1) * t) / (1 - math.exp(-t))
            value = dm.trace_norm_semigroup(t)
            assert partial <= value * (1 + 1e-14)
            assert value - partial <= tail * (1 + 1e-10) + 1e-15

    def test_monotone_to_zero(self):
        values = [dm.trace_norm_semigroup(t) for t in np.geomspace(0.1, 50, 40)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-20

    def test_nonpositive_time(self):
        with pytest.raises(NonPositiveTime):
            dm.trace_norm_semigroup(0.0)


class TestPerturbationNorm:
    def test_examples(self):
        assert dm.perturbation_schatten_norm(0, 2, 1.0) == pytest.approx(
            math.sqrt(math.exp(-2) / (1 - math.exp(-2))), rel=1e-14)
        assert dm.perturbation_schatten_norm(0, 2, 1.0) == pytest.approx(0.3956231, abs=1e-7)
        assert dm.perturbation_schatten_norm(0, np.inf, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
        assert dm.perturbation_schatten_norm(0.5, 4, 0.01) == pytest.approx(
            brute_norm(0.5, 4, 0.01, 10_000), rel=1e-12)

    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.25, 0.5, 1.0])
    @pytest.mark.parametrize("q", [1, 1.5, 2, 4, np.inf])
    def test_brute_force(self, alpha, q):
        for t in (0.003, 0.05, 0.7):
            assert dm.perturbation_schatten_norm(alpha, q, t) == pytest.approx(brute_norm(alpha, q, t), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(alpha=st.floats(-1, 1), t=st.floats(1e-3, 3))
    def test_non_increasing_in_q(self, alpha, t):
        qs = [1, 1.2, 2, 3, 7, np.inf]
        norms = [dm.perturbation_schatten_norm(alpha, q, t) for q in qs]
        assert all(a >= b * (1 - 1e-12) for a, b in zip(norms, norms[1:]))

    @pytest.mark.parametrize("alpha, q", [(0.0, 1), (0.5, 2), (0.5, 4), (1.0, 1.5), (0.25, 8), (-0.25, 2)])
    def test_small_t_slope(self, alpha, q):
        t = np.geomspace(1e-4, 1e-2, 15)
        norms = [dm.perturbation_schatten_norm(alpha, q, s) for s in t]
        slope = np.polyfit(np.log(t), np.log(norms), 1)[0]
        assert slope == pytest.approx(-(q * alpha + 1) / q, abs=0.02)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.8])
    def test_operator_norm_slope(self, alpha):
        t = np.geomspace(1e-4, 1e-2, 15)
        norms = [dm.perturbation_schatten_norm(alpha, np.inf, s) for s in t]
        slope = np.polyfit(np.log(t), np.log(norms), 1)[0]
        assert slope == pytest.approx(-alpha, abs=0.02)

    @pytest.mark.parametrize("alpha, q", [(0.0, 1.0), (0.0, 1.5), (0.5, 1.8), (0.5, 2.5), (0.25, 1.2), (0.25, 1.5)])
    def test_integral_converges_iff_pcq(self, alpha, q):
        from gibbs_nsho.quadrature import composite_gauss_legendre

        # contributions of successive decades [10^-k-1, 10^-k]; they shrink geometrically iff integrable
        def decade(k):
            x, w = composite_gauss_legendre(np.geomspace(10.0 ** (-k - 1), 10.0**-k, 4), 8)
            return sum(wi * dm.perturbation_schatten_norm(alpha, q, xi) for xi, wi in zip(x, w))

        pieces = [decade(k) for k in (2, 3, 4)]
        ratio = pieces[2] / pieces[1]
        assert (ratio < 0.9) == dm.classify_pcq(alpha, q)


class TestClassification:
    def test_pcq_examples(self):
        assert dm.classify_pcq(0, 1) is False
        assert dm.classify_pcq(0, 1.5) is True
        assert dm.classify_pcq(0.5, 2) is False
        assert dm.classify_pcq(0.5, 2.0001) is True

    def test_counterexample(self):
        assert dm.counterexample_classify(0) is dm.CounterexampleClass.GIBBS
        assert dm.counterexample_classify(-1) is dm.CounterexampleClass.UNITARY_GROUP_ONLY
        assert dm.counterexample_classify(-2) is dm.CounterexampleClass.NOT_GENERATOR

    def test_growth_bound(self):
        assert dm.growth_bound(dm.HARMONIC_LIKE).phi == -1
        assert dm.growth_bound(dm.CUBIC_COUNTEREXAMPLE).phi == -1
        custom = dm.DiagonalGenerator("Custom", lambda n: n**2 - 3)
        assert dm.growth_bound(custom).phi == 2

    def test_counterexample_norm_decays_like_inverse_t(self):
        t = np.geomspace(1e-4, 1e-2, 12)
        norms = [dm.counterexample_perturbation_norm(0.5, s) for s in t]
        slope, icpt = np.polyfit(np.log(t), np.log(norms), 1)
        assert slope == pytest.approx(-1, abs=0.01)
        # brute-force check of the unimodal max
        n = np.arange(1, 10**6, dtype=float)
        assert norms[0] == pytest.approx(0.5 * np.max(n * np.exp(-n * t[0])), rel=1e-14)


class TestResolvent:
    def brute(self, r, y):
        n = np.arange(1, 1001, dtype=float)
        return np.max(1 / np.hypot(n - r, n**3 - y))

    def test_examples(self):
        assert dm.resolvent_norm("CubicCounterexample", 0, 1000) == pytest.approx(0.1, rel=1e-14)
        assert dm.resolvent_argmax("CubicCounterexample", 0, 1000)[1] == 10
        assert dm.resolvent_norm("CubicCounterexample", 0, 1e6) == pytest.approx(0.01, rel=1e-14)
        assert dm.resolvent_argmax("CubicCounterexample", 0, 1e6)[1] == 100
        assert dm.resolvent_norm("HarmonicLike", 0, 0) == 1

    @settings(max_examples=200, deadline=None)
    @given(r=st.floats(-50, 0.99), y=st.floats(-1e8, 1e8))
    def test_matches_brute_force(self, r, y):
        assert dm.resolvent_norm("CubicCounterexample", r, y) == pytest.approx(self.brute(r, y), rel=1e-13)

    def test_slope(self):
        y = np.arange(10, 1001, 10, dtype=float) ** 3
        y = y[(y >= 1e3) & (y <= 1e9)]
        norms = [dm.resolvent_norm("CubicCounterexample", 0, v) for v in y]
        slope = np.polyfit(np.log(y), np.log(norms), 1)[0]
        assert slope == pytest.approx(-1 / 3, abs=0.03)

    def test_spectral_bound(self):
        with pytest.raises(SpectralBoundViolated):
            dm.resolvent_norm("HarmonicLike", 1.0, 0.0)
        with pytest.raises(SpectralBoundViolated):
            dm.resolvent_norm("CubicCounterexample", 2.0, 5.0)
