"""Upper tails of weighted chi-square mixtures Q = sum_k w_k Y_k, Y_k ~ chi^2_{d_k}.

Two methods are provided: a three-cumulant Gamma match (cheap, approximate)
and numerical inversion of the characteristic function,

    P[Q > x] = 1/2 + (1/pi) int_0^inf sin(theta(u)) / (u rho(u)) du,
    theta(u) = (1/2) sum_k d_k atan(w_k u) - x u / 2,
    rho(u)   = prod_k (1 + w_k^2 u^2)^{d_k / 4}.

Long mixtures are dominated by tiny weights. Terms with w_k U <= 1/2, where U
is the upper integration limit, enter theta and log rho only through the
power sums sum_k d_k w_k^p of their Taylor series, so each integrand
evaluation costs O(number of large weights).
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate, optimize, stats

from .coeffs import K_MAX, ChiSqMixture, coeff_seq, eigen_dims, mixture_weights
from .kernels import WeightSpec

__all__ = [
    "ChiSqMixture",
    "ImhofConvergenceError",
    "TailQuery",
    "TailEvaluator",
    "hbe_tail",
    "imhof_tail",
    "algorithm1_pvalue",
    "mixture_quantile",
]

SERIES_ORDER = 8  # power sums S_1..S_8 for the small-weight block
HEAD_PERIODS = 100  # beyond this many oscillations the tail is done as Fourier integrals


class ImhofConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TailQuery:
    K_max: int = K_MAX
    delta: float = 0.0
    imhof_accuracy: float = 1e-6

    def __post_init__(self):
        if self.K_max < 1:
            raise ValueError("K_max must be positive")
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")
        if self.imhof_accuracy <= 0:
            raise ValueError("accuracy must be positive")


def hbe_tail(mix: ChiSqMixture, x: float) -> float:
    """Hall-Buckley-Eagleson approximation to P[Q > x]."""
    k1, k2, k3 = mix.cumulants()
    return _hbe_from_cumulants(k1, k2, k3, x)


def _hbe_from_cumulants(k1, k2, k3, x):
    if k2 <= 0:
        raise ValueError("degenerate mixture: zero variance")
    nu = 8 * k2**3 / k3**2
    z = (x - k1) / math.sqrt(k2) * math.sqrt(2 * nu) + nu
    if z <= 0:
        return 1.0
    return float(stats.chi2.sf(z, nu))


class TailEvaluator:
    """Prepared mixture for repeated Imhof tail evaluations at a fixed accuracy."""

    def __init__(self, mix: ChiSqMixture, accuracy: float = 1e-6, max_doublings: int = 400):
        if len(mix.w) == 0:
            raise ValueError("empty mixture")
        order = np.argsort(-mix.w, kind="stable")
        w, d = mix.w[order], mix.d[order]
        self.mix = mix
        self.accuracy = accuracy
        self.upper = self._upper_limit(w, d, accuracy, max_doublings)
        U = self.upper
        # remainder of the alternating Taylor series is at most d (wU)^9 per term
        y = w * U
        rem = np.cumsum((d * y**9)[::-1])[::-1]
        small = (y <= 0.5) & (rem <= 1e-13)
        split = int(np.argmax(small)) if np.any(small) else len(w)
        self.w_head, self.d_head = w[:split], d[:split]
        tw, td = w[split:], d[split:]
        self.power = np.array([np.sum(td * tw**p) for p in range(1, SERIES_ORDER + 1)])
        self.mean = mix.mean()

    @staticmethod
    def _upper_limit(w, d, accuracy, max_doublings):
        """Smallest U (up to doubling) with the integrand-envelope tail bound below accuracy/4.

        For any subset S of terms, |integrand| <= 1/(u prod_S (w u)^{d/2}), so the
        integral beyond U is at most 1/(pi m U^m prod_S w^{d/2}) with m = sum_S d/2.
        """
        target = math.log(accuracy / 4)
        U = 1.0 / w[0]
        for _ in range(max_doublings):
            y = w * U
            S = y >= 1
            if not np.any(S):
                S = np.zeros_like(y, dtype=bool)
                S[0] = True
            m = float(np.sum(d[S])) / 2
            log_bound = -math.log(math.pi) - math.log(m) - float(np.sum(d[S] / 2 * np.log(y[S])))
            if log_bound <= target:
                return U
            U *= 2
        raise ImhofConvergenceError("integration range bound did not reach the requested accuracy")

    def _phase_and_logrho(self, u):
        u = np.asarray(u, dtype=float)
        wu = np.multiply.outer(u, self.w_head)
        phase = 0.5 * (np.arctan(wu) @ self.d_head) if self.d_head.size else np.zeros_like(u)
        logrho = 0.25 * (np.log1p(wu * wu) @ self.d_head) if self.d_head.size else np.zeros_like(u)
        S = self.power
        u2 = u * u
        phase = phase + 0.5 * u * (S[0] - u2 * (S[2] / 3 - u2 * (S[4] / 5 - u2 * S[6] / 7)))
        logrho = logrho + 0.25 * u2 * (S[1] - u2 * (S[3] / 2 - u2 * (S[5] / 3 - u2 * S[7] / 4)))
        return phase, logrho

    def _integrand(self, u, x):
        phase, logrho = self._phase_and_logrho(u)
        return np.sin(phase - 0.5 * x * u) * np.exp(-logrho) / u

    def imhof(self, x: float) -> float:
        if x <= 0:
            return 1.0
        acc = self.accuracy
        U = self.upper
        periods = x * U / (4 * math.pi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            if periods <= HEAD_PERIODS:
                limit = int(max(200, 20 * periods))
                val, err = integrate.quad(
                    lambda u: float(self._integrand(u, x)), 0.0, U, epsabs=acc / 4, epsrel=0, limit=limit
                )[:2]
            else:
                # finite head, then the oscillatory remainder as Fourier integrals
                A = 4 * math.pi * HEAD_PERIODS / x
                val, err = integrate.quad(
                    lambda u: float(self._integrand(u, x)), 0.0, A, epsabs=acc / 8, epsrel=0, limit=8000
                )[:2]

                def env(u, part):
                    phase, logrho = self._phase_and_logrho(u)
                    f = np.sin(phase) if part == "s" else np.cos(phase)
                    return float(f * np.exp(-logrho) / u)

                v1, e1 = integrate.quad(env, A, np.inf, args=("s",), weight="cos", wvar=0.5 * x, epsabs=acc / 16, limlst=200)[:2]
                v2, e2 = integrate.quad(env, A, np.inf, args=("c",), weight="sin", wvar=0.5 * x, epsabs=acc / 16, limlst=200)[:2]
                val += v1 - v2
                err += e1 + e2
        if not math.isfinite(val) or err > 10 * acc:
            raise ImhofConvergenceError(f"Imhof integral error estimate {err:.2e} exceeds accuracy {acc:.1e}")
        p = 0.5 + val / math.pi
        if p < acc:
            return 0.0
        if p > 1 - acc:
            return 1.0
        return p

    def hbe(self, x: float) -> float:
        return hbe_tail(self.mix, x)


def imhof_tail(mix: ChiSqMixture, x: float, accuracy: float = 1e-6) -> float:
    """P[Q > x] by Imhof's characteristic-function inversion."""
    return TailEvaluator(mix, accuracy).imhof(x)


# ---------------------------------------------------------------------------
# End-to-end p-values for projected-ecdf statistics


class _Prepared:
    """Coefficient-derived quantities reused across x for one (weight, q, query)."""

    def __init__(self, weight: WeightSpec, q: int, query: TailQuery):
        seq = coeff_seq(weight, q, query.K_max)
        self.full = mixture_weights(seq)
        b = np.asarray(seq.b[1:])
        k = np.arange(1, len(b) + 1, dtype=float)
        w = b / 2 if q == 1 else b / (1 + 2 * k / (q - 1))
        d = eigen_dims(len(b), q)
        self.w_all, self.d_all = w, d
        wd = w * d
        self.cum1 = np.cumsum(wd)
        self.cum2 = 2 * np.cumsum(wd * w)
        self.cum3 = 8 * np.cumsum(wd * w * w)
        self.query = query
        self._evaluators: dict[int, TailEvaluator] = {}

    def hbe(self, K, x):
        return _hbe_from_cumulants(self.cum1[K - 1], self.cum2[K - 1], self.cum3[K - 1], x)

    def truncation(self, x):
        """Smallest K whose HBE tail is within delta of the K_max tail (bisection)."""
        K_max, delta = len(self.w_all), self.query.delta
        if delta <= 0:
            return K_max
        ref = self.hbe(K_max, x)
        lo, hi = 1, K_max
        while lo < hi:
            mid = (lo + hi) // 2
            if abs(self.hbe(mid, x) - ref) <= delta:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def evaluator(self, K):
        ev = self._evaluators.get(K)
        if ev is None:
            mix = ChiSqMixture(self.w_all[:K], self.d_all[:K])
            ev = TailEvaluator(mix, self.query.imhof_accuracy)
            self._evaluators[K] = ev
        return ev

    def pvalue(self, x):
        if x <= 0:
            return 1.0
        return self.evaluator(self.truncation(x)).imhof(x)


_PREPARED: dict[tuple, _Prepared] = {}


def _prepared(weight, q, query):
    key = (weight.key, q, query)
    prep = _PREPARED.get(key)
    if prep is None:
        prep = _Prepared(weight, q, query)
        _PREPARED[key] = prep
    return prep


def algorithm1_pvalue(weight: WeightSpec, q: int, x: float, query: TailQuery = TailQuery()) -> float:
    """Asymptotic p-value of a projected-ecdf statistic value x.

    Builds b_1..b_{K_max}, optionally shortens the series to the smallest K
    whose HBE tail is within ``query.delta`` of the full one, and returns the
    Imhof tail of the truncated mixture.
    """
    return _prepared(weight, q, query).pvalue(float(x))


def mixture_quantile(weight: WeightSpec, q: int, alpha: float, query: TailQuery = TailQuery()) -> float:
    """Upper alpha quantile of the asymptotic null law (the n = infinity critical value)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    prep = _prepared(weight, q, query)
    f = lambda x: prep.pvalue(x) - alpha  # noqa: E731
    mean = prep.full.mean()
    lo, hi = 0.25 * mean, 2.0 * mean
    while f(lo) < 0:
        lo /= 2
    while f(hi) > 0:
        lo, hi = hi, 2 * hi
    return float(optimize.brentq(f, lo, hi, xtol=1e-9, rtol=1e-12))
