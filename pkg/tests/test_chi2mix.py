import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from projunif.chi2mix import (
    ImhofConvergenceError,
    TailEvaluator,
    TailQuery,
    algorithm1_pvalue,
    hbe_tail,
    imhof_tail,
    mixture_quantile,
)
from projunif.coeffs import ChiSqMixture, coeff_seq, mixture_weights
from projunif.kernels import AD, CvM, Rothman

WEIGHTS = [CvM(), AD(), Rothman(1 / 3)]
QS = [1, 2, 3, 10]


def circle_cvm(K):
    k = np.arange(1, K + 1)
    return ChiSqMixture(1 / (2 * math.pi**2 * k * k), np.full(K, 2.0))


class TestMixtureType:
    def test_zero_weights_dropped(self):
        m = ChiSqMixture([1.0, 0.0, 0.5], [1, 3, 2])
        assert list(m.w) == [1.0, 0.5] and list(m.d) == [1, 2]

    def test_invalid(self):
        with pytest.raises(ValueError):
            ChiSqMixture([1.0, -1.0], [1, 1])
        with pytest.raises(ValueError):
            ChiSqMixture([1.0], [0])
        with pytest.raises(ValueError):
            ChiSqMixture([1.0, 2.0], [1])

    def test_cumulants(self):
        m = ChiSqMixture([2.0, 0.5], [3, 4])
        assert m.cumulants() == pytest.approx((8.0, 2 * (12 + 1), 8 * (24 + 0.5)))


class TestQuery:
    def test_defaults(self):
        q = TailQuery()
        assert (q.K_max, q.delta, q.imhof_accuracy) == (50_000, 0.0, 1e-6)

    def test_domain(self):
        for kw in ({"K_max": 0}, {"delta": -0.1}, {"delta": 1.5}, {"imhof_accuracy": 0}):
            with pytest.raises(ValueError):
                TailQuery(**kw)


class TestHBE:
    def test_exact_for_single_term(self):
        assert hbe_tail(ChiSqMixture([1.0], [2]), 2 * math.log(20)) == pytest.approx(0.05, abs=1e-12)
        for w, d, x in ((3.0, 5, 7.0), (0.2, 1, 0.9)):
            assert hbe_tail(ChiSqMixture([w], [d]), x) == pytest.approx(stats.chi2.sf(x / w, d), abs=1e-12)

    def test_full_tail_at_origin(self):
        assert hbe_tail(ChiSqMixture([1.0], [1]), 0.0) == 1.0

    def test_circle_cvm_critical_value(self):
        assert hbe_tail(circle_cvm(10_000), 0.3738) == pytest.approx(0.05, abs=5e-3)

    def test_degenerate(self):
        m = ChiSqMixture([1.0], [1])
        object.__setattr__(m, "w", np.array([0.0]))
        with pytest.raises(ValueError, match="degenerate"):
            hbe_tail(m, 1.0)


class TestImhof:
    def test_single_terms(self):
        assert imhof_tail(ChiSqMixture([1.0], [2]), 5.9915) == pytest.approx(math.exp(-5.9915 / 2), abs=1e-6)
        assert imhof_tail(ChiSqMixture([1.0], [1]), 3.8415) == pytest.approx(stats.chi2.sf(3.8415, 1), abs=1e-6)
        assert imhof_tail(ChiSqMixture([1.0], [1]), 3.8415) == pytest.approx(0.05, abs=1e-5)

    def test_sphere_ad_critical_value(self):
        k = np.arange(1, 50_001)
        mix = ChiSqMixture(1 / (k * (k + 1) * (2 * k + 1)), 2 * k + 1)
        assert imhof_tail(mix, 1.8227) == pytest.approx(0.05, abs=1e-3)

    def test_two_exponentials(self):
        # w1 chi2_2 + w2 chi2_2 is a hypoexponential: tail (w1 e^{-x/2w1} - w2 e^{-x/2w2}) / (w1 - w2)
        w1, w2 = 1.0, 0.3
        mix = ChiSqMixture([w1, w2], [2, 2])
        for x in (0.5, 2.0, 6.0):
            ref = (w1 * math.exp(-x / (2 * w1)) - w2 * math.exp(-x / (2 * w2))) / (w1 - w2)
            assert imhof_tail(mix, x) == pytest.approx(ref, abs=1e-6)

    def test_equal_weights_are_one_chisquare(self):
        mix = ChiSqMixture(np.full(7, 0.4), np.array([1, 2, 3, 1, 1, 2, 5]))
        for x in (1.0, 5.0, 12.0):
            assert imhof_tail(mix, x) == pytest.approx(stats.chi2.sf(x / 0.4, 15), abs=1e-6)

    def test_long_series_tail_block(self):
        # small weights enter through power sums; compare against summing every term directly
        mix = circle_cvm(20_000)
        ev = TailEvaluator(mix)
        assert ev.w_head.size < 200
        u = np.linspace(0.1, ev.upper, 50)
        phase, logrho = ev._phase_and_logrho(u)
        wu = np.multiply.outer(u, mix.w)
        assert np.allclose(phase, 0.5 * np.arctan(wu) @ mix.d, atol=1e-10)
        assert np.allclose(logrho, 0.25 * np.log1p(wu * wu) @ mix.d, atol=1e-10)

    def test_boundaries(self):
        mix = circle_cvm(100)
        assert imhof_tail(mix, 0.0) == 1.0
        assert imhof_tail(mix, 50.0) == 0.0

    def test_convergence_failure_reported(self):
        with pytest.raises(ImhofConvergenceError):
            TailEvaluator(ChiSqMixture([1.0], [1]), accuracy=1e-300, max_doublings=3)

    def test_against_simulation(self):
        K, N = 200, 1_000_000
        mix = mixture_weights(coeff_seq(AD(), 2, K))
        rng = np.random.default_rng(5)
        total = np.zeros(N)
        for w, d in zip(mix.w, mix.d):
            total += w * rng.chisquare(d, N)
        for x in np.quantile(total, [0.8, 0.95, 0.99]):
            p = imhof_tail(mix, x)
            emp = np.mean(total > x)
            assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / N)

    def test_small_x_long_oscillation(self):
        # chi2_1 + chi2_2 at x = 1/16 needs ~1300 periods before the envelope bound is met
        mix = ChiSqMixture(np.array([1.0, 1.0]), np.array([1, 2]))
        x = 0.0625
        ref = integrate.quad(lambda y: stats.chi2.pdf(y, 1) * stats.chi2.sf(x - y, 2), 0, x)[0] + stats.chi2.sf(x, 1)
        assert TailEvaluator(mix, 1e-8).imhof(x) == pytest.approx(ref, abs=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(w=st.lists(st.floats(0.01, 3.0), min_size=1, max_size=6), x=st.floats(0.05, 20))
    def test_decreasing_in_x(self, w, x):
        mix = ChiSqMixture(np.array(w), np.arange(1, len(w) + 1))
        ev = TailEvaluator(mix, 1e-8)
        assert ev.imhof(x) >= ev.imhof(x * 1.2) - 1e-8


def _truncation_tol(weight, x, K=50_000):
    """Imhof accuracy plus the p-value shift caused by the mean of the dropped terms k > K."""
    dropped = 1 / (math.pi**2 * K)  # sum_{k>K} 2 w_k for both circle CvM and Ajne weights
    return 2e-6 + abs(algorithm1_pvalue(weight, 1, x - dropped) - algorithm1_pvalue(weight, 1, x))


class TestAlgorithm1:
    def test_examples(self):
        assert algorithm1_pvalue(CvM(), 1, 0.5368) == pytest.approx(0.01, abs=1e-3)
        assert algorithm1_pvalue(Rothman(1 / 3), 10, 0.3304) == pytest.approx(0.05, abs=2e-3)
        assert algorithm1_pvalue(CvM(), 1, 0.0) == 1.0

    def test_delta_truncation_shortens_series(self):
        from projunif.chi2mix import _prepared

        query = TailQuery(delta=1e-3)
        prep = _prepared(CvM(), 2, query)
        K = prep.truncation(0.3291)
        assert 1 <= K < 50_000
        assert abs(prep.hbe(K, 0.3291) - prep.hbe(50_000, 0.3291)) <= 1e-3
        if K > 1:
            assert abs(prep.hbe(K - 1, 0.3291) - prep.hbe(50_000, 0.3291)) > 1e-3
        assert algorithm1_pvalue(CvM(), 2, 0.3291, query) == pytest.approx(0.05, abs=3e-3)

    def test_watson_limit_law(self):
        # Watson's U^2 asymptotic tail: 2 sum_{m>=1} (-1)^{m-1} exp(-2 m^2 pi^2 u)
        for u in (0.1, 0.187, 0.267):
            ref = 2 * sum((-1) ** (m - 1) * math.exp(-2 * m * m * math.pi**2 * u) for m in range(1, 60))
            assert algorithm1_pvalue(CvM(), 1, 2 * u) == pytest.approx(ref, abs=_truncation_tol(CvM(), 2 * u))

    def test_ajne_limit_law(self):
        # Ajne's A_n asymptotic tail: (4/pi) sum_{m odd} (-1)^{(m-1)/2} exp(-m^2 pi^2 a / 2) / m
        for a in (0.3, 0.6, 1.2):
            ref = 4 / math.pi * sum((-1) ** ((m - 1) // 2) * math.exp(-m * m * math.pi**2 * a / 2) / m for m in range(1, 200, 2))
            assert algorithm1_pvalue(Rothman(0.5), 1, a) == pytest.approx(ref, abs=_truncation_tol(Rothman(0.5), a))

    def test_circle_ad_limit_against_mean(self):
        mix = mixture_weights(coeff_seq(AD(), 1, 50_000))
        # the null mean of the AD statistic is psi(0) - b_0 = 0 - (-1) = 1
        assert mix.mean() == pytest.approx(1.0, abs=1e-3)


class TestQuantiles:
    @pytest.mark.parametrize(
        "weight,q,alpha,value,tol",
        [
            (CvM(), 1, 0.10, 0.3035, 5e-4),
            (AD(), 1, 0.05, 2.0304, 1e-3),
            (Rothman(1 / 3), 3, 0.01, 0.5589, 1e-3),
        ],
    )
    def test_examples(self, weight, q, alpha, value, tol):
        assert mixture_quantile(weight, q, alpha) == pytest.approx(value, abs=tol)

    def test_inverts_pvalue(self):
        x = mixture_quantile(AD(), 3, 0.07)
        assert algorithm1_pvalue(AD(), 3, x) == pytest.approx(0.07, abs=1e-5)

    def test_domain(self):
        for a in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError):
                mixture_quantile(CvM(), 1, a)


@pytest.mark.parametrize("q", QS)
@pytest.mark.parametrize("weight", WEIGHTS, ids=str)
def test_hbe_close_to_imhof(weight, q):
    mix = mixture_weights(coeff_seq(weight, q, 10_000))
    for alpha in (0.01, 0.05, 0.10, 0.20):
        x = mixture_quantile(weight, q, alpha)
        assert abs(hbe_tail(mix, x) - imhof_tail(mix, x)) <= 5e-3


@pytest.mark.parametrize("q", QS)
@pytest.mark.parametrize("weight", WEIGHTS, ids=str)
def test_truncation_stability(weight, q):
    for alpha in (0.01, 0.10):
        x = mixture_quantile(weight, q, alpha)
        ref = algorithm1_pvalue(weight, q, x)
        assert abs(algorithm1_pvalue(weight, q, x, TailQuery(K_max=1000)) - ref) <= 1e-2
        assert abs(algorithm1_pvalue(weight, q, x, TailQuery(K_max=10_000)) - ref) <= 1e-3
