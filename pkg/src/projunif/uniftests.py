"""Uniformity statistics on the sphere and their p-values.

Every statistic accepts a ``UnitSample``, an (n, q+1) array, or a batch of
shape (B, n, q+1); batched input returns one value per sample. Angle-based
statistics share a ``PairContext`` so the n(n-1)/2 angles are formed once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
import math
from typing import Any, Callable

import numpy as np
from scipy import integrate, special, stats

from .chi2mix import TailQuery, algorithm1_pvalue
from .kernels import AD, CvM, Dirac, Rothman, WeightSpec, get_kernel, parse_weight
from .projdist import proj_cdf, proj_quantile

TWO_PI = 2 * math.pi
PAIR_CHUNK = 8192


class UnsupportedDimension(ValueError):
    pass


@dataclass(frozen=True)
class UnitSample:
    """n points on the q-sphere, stored as unit rows of an (n, q+1) array."""

    points: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 2:
            raise ValueError("points must be an (n, q+1) array with n >= 1 and q >= 1")
        norms = np.linalg.norm(x, axis=1)
        if np.any(~np.isfinite(norms)) or np.any(norms == 0):
            raise ValueError("points must be finite and non-zero")
        x = x / norms[:, None]
        x.setflags(write=False)
        object.__setattr__(self, "points", x)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def q(self) -> int:
        return self.points.shape[1] - 1

    @classmethod
    def from_angles(cls, angles) -> "UnitSample":
        a = np.asarray(angles, dtype=float)
        return cls(np.column_stack([np.cos(a), np.sin(a)]))


def circle_points(angles) -> np.ndarray:
    a = np.asarray(angles, dtype=float)
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


def _points(sample) -> np.ndarray:
    if isinstance(sample, UnitSample):
        return sample.points
    x = np.asarray(sample, dtype=float)
    if x.ndim < 2:
        raise ValueError("expected an (n, q+1) array")
    return x


@lru_cache(maxsize=16)
def _upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the i < j entries of an n x n matrix."""
    iu, ju = np.triu_indices(n, 1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


@lru_cache(maxsize=16)
def _row_blocks(n: int, width: int) -> tuple:
    """Row blocks [r0, r1) of about ``width`` gram entries each, with the flat
    positions of their i < j entries and the matching slice of the pair vector."""
    blocks, start, r0 = [], 0, 0
    rows = max(1, width // max(n, 1))
    while r0 < n - 1:
        r1 = min(n - 1, r0 + rows)
        i = np.arange(r0, r1)
        counts = n - 1 - i
        local = np.concatenate([(k - r0) * n + np.arange(k + 1, n) for k in i])
        local.setflags(write=False)
        blocks.append((r0, r1, local, start, start + int(counts.sum())))
        start += int(counts.sum())
        r0 = r1
    return tuple(blocks)


class PairContext:
    """Points of one sample or a batch, with lazily computed pairwise angles."""

    def __init__(self, sample):
        self.X = _points(sample)
        self.n = self.X.shape[-2]
        self.q = self.X.shape[-1] - 1

    @cached_property
    def theta(self) -> np.ndarray:
        """Angles theta_ij for i < j along the last axis."""
        n, X = self.n, self.X
        lead = X.shape[:-2]
        out = np.empty(lead + (n * (n - 1) // 2,))
        XT = np.swapaxes(X, -1, -2)
        for r0, r1, local, a, b in _row_blocks(n, PAIR_CHUNK * 2):
            g = X[..., r0:r1, :] @ XT
            out[..., a:b] = np.take(g.reshape(lead + (-1,)), local, axis=-1)
        np.clip(out, -1.0, 1.0, out=out)
        return np.arccos(out, out=out)

    def pair_sum(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        if self.n < 2:
            return np.zeros(self.X.shape[:-2])
        theta = self.theta
        # fixed-size chunks keep kernel temporaries in cache whatever n is
        step = max(1, PAIR_CHUNK // max(1, theta[..., :1].size))
        total = np.zeros(theta.shape[:-1])
        for start in range(0, theta.shape[-1], step):
            total += np.sum(f(theta[..., start:start + step]), axis=-1)
        return total


def _ctx(sample) -> PairContext:
    return sample if isinstance(sample, PairContext) else PairContext(sample)


def _ret(v):
    v = np.asarray(v, dtype=float)
    return v if v.ndim else float(v)


def pairwise_angles(sample) -> np.ndarray:
    """Upper-triangular pairwise angles acos(X_i'X_j), i < j."""
    ctx = _ctx(sample)
    if ctx.n < 2:
        raise ValueError("need at least two points")
    return ctx.theta


# ---------------------------------------------------------------------------
# Projected-ecdf statistics


def stat_projected(sample, weight: WeightSpec) -> float | np.ndarray:
    """(2/n) sum_{i<j} psi_q^W(theta_ij) + bias_W(n)."""
    if not isinstance(weight, WeightSpec):
        raise TypeError(f"unsupported weight {weight!r}")
    ctx = _ctx(sample)
    kernel = get_kernel(ctx.q, weight)
    return _ret(2.0 / ctx.n * ctx.pair_sum(kernel) + weight.bias(ctx.n))


def _circular_theta(angles) -> tuple[np.ndarray, int]:
    a = np.asarray(angles, dtype=float)
    n = a.shape[-1]
    iu, ju = _upper_pairs(n)
    diff = np.abs(a[..., iu] - a[..., ju]) % TWO_PI
    return np.minimum(diff, TWO_PI - diff), n


def stat_watson(angles) -> float:
    """Watson's U_n^2 for angles in radians."""
    theta, n = _circular_theta(angles)
    tb = theta / TWO_PI
    h = 0.5 * (tb * tb - tb + 1 / 6)
    return _ret(2.0 / n * np.sum(h, axis=-1) + 1 / 12)


def stat_rothman_circle(angles, t: float) -> float:
    theta, n = _circular_theta(angles)
    t_m = min(t, 1 - t)
    h = np.maximum(t_m - theta / TWO_PI, 0.0) - t_m**2
    return _ret(t * (1 - t) + 2.0 / n * np.sum(h, axis=-1))


def stat_ajne(sample) -> float:
    ctx = _ctx(sample)
    return _ret(ctx.n / 4 - ctx.pair_sum(lambda th: th) / (ctx.n * math.pi))


@lru_cache(maxsize=None)
def mean_chord(q: int) -> float:
    """E||X_1 - X_2|| for independent uniform points, sqrt(2) int sqrt(1 - t) dF_q(t)."""
    # in u = F_q(t) coordinates the integrand is bounded
    f = lambda u: math.sqrt(2 * (1 - proj_quantile(q, u)))  # noqa: E731
    return integrate.quad(f, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def stat_bakshaev(sample) -> float:
    """n E||X1 - X2|| - (1/n) sum_{i,j} ||X_i - X_j||."""
    ctx = _ctx(sample)
    chords = ctx.pair_sum(lambda th: 2 * np.sin(0.5 * th))
    return _ret(ctx.n * mean_chord(ctx.q) - 2.0 * chords / ctx.n)


def stat_rayleigh(sample) -> float:
    ctx = _ctx(sample)
    mean = np.mean(ctx.X, axis=-2)
    return _ret((ctx.q + 1) * ctx.n * np.sum(mean * mean, axis=-1))


def stat_bingham(sample) -> float:
    ctx = _ctx(sample)
    p = ctx.q + 1
    S = np.swapaxes(ctx.X, -1, -2) @ ctx.X / ctx.n
    tr = np.sum(S * S, axis=(-1, -2))
    return _ret(p * (p + 2) / 2 * ctx.n * (tr - 1 / p))


def stat_gine(sample) -> float:
    """G_n = n/2 - (q / (2n)) (Gamma(q/2) / Gamma((q+1)/2))^2 sum_{i<j} sin theta_ij; null mean 1/2."""
    ctx = _ctx(sample)
    q = ctx.q
    if q == 1:
        raise UnsupportedDimension("Gine's statistic is only provided for q >= 2")
    const = q / (2 * ctx.n) * math.exp(2 * (math.lgamma(q / 2) - math.lgamma((q + 1) / 2)))
    return _ret(ctx.n / 2 - const * ctx.pair_sum(np.sin))


# ---------------------------------------------------------------------------
# Random-projection Kolmogorov-Smirnov test


def random_directions(k: int, q: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((k, q + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ks_distances(sample, directions: np.ndarray) -> np.ndarray:
    """KS distance between the projected ecdf and F_q for each direction (last axis)."""
    X = _points(sample)
    n, q = X.shape[-2], X.shape[-1] - 1
    u = np.sort(proj_cdf(q, np.clip(X @ directions.T, -1, 1)), axis=-2)
    i = np.arange(1, n + 1, dtype=float)[:, None]
    return np.maximum(np.max(i / n - u, axis=-2), np.max(u - (i - 1) / n, axis=-2))


def stat_ccf09(sample, directions: np.ndarray) -> float:
    """Largest per-direction KS distance; equivalent to the smallest per-direction p-value."""
    return _ret(np.max(ks_distances(sample, directions), axis=-1))


def ccf09_test(sample, k_dirs: int = 50, M: int = 2000, seed: int = 0) -> "TestOutcome":
    """KS over random projections with a Monte Carlo calibrated min-p aggregate.

    The directions are drawn once from ``seed`` and kept fixed for all Monte
    Carlo replicates, so the p-value is conditional on them.
    """
    if k_dirs < 1:
        raise ValueError("k_dirs must be positive")
    X = _points(sample)
    n, q = X.shape[0], X.shape[1] - 1
    rng = np.random.default_rng(seed)
    dirs = random_directions(k_dirs, q, rng)
    D = ks_distances(X, dirs)
    per_dir = stats.kstwo.sf(D, n)
    observed = float(D.max())
    exceed = 0
    for start in range(0, M, 500):
        b = min(500, M - start)
        Z = rng.standard_normal((b, n, q + 1))
        Z /= np.linalg.norm(Z, axis=-1, keepdims=True)
        exceed += int(np.sum(stat_ccf09(Z, dirs) >= observed))
    p = (1 + exceed) / (M + 1)
    return TestOutcome(
        statistic=float(per_dir.min()),
        p_value=p,
        method="monte_carlo",
        test_id="ccf09",
        params={"q": q, "n": n, "k_dirs": k_dirs, "M": M, "seed": seed, "max_ks": observed},
    )


# ---------------------------------------------------------------------------
# Invariant likelihood ratio test against a semicircle alternative


def ilrt_semicircle(angles, kappa: float, log: bool = False) -> float:
    """Integral over rotations of the semicircle-mixture likelihood.

    The integrand is piecewise constant in the rotation angle with breaks at
    Theta_i +- pi/2, so the integral is an exact sum over the 2n arcs.
    """
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    a = np.mod(np.asarray(angles, dtype=float).reshape(-1), TWO_PI)
    cuts = np.sort(np.mod(np.concatenate([a + math.pi / 2, a - math.pi / 2]), TWO_PI))
    lengths = np.diff(np.append(cuts, cuts[0] + TWO_PI))
    mids = cuts + 0.5 * lengths
    inside = np.cos(a[:, None] - mids[None, :]) >= 0
    log_g = np.where(inside, math.log1p(kappa / 2), math.log1p(-kappa / 2)) - math.log(TWO_PI)
    keep = lengths > 0
    terms = np.log(lengths[keep]) + log_g.sum(axis=0)[keep]
    log_L = float(special.logsumexp(terms))
    return log_L if log else math.exp(log_L)


# ---------------------------------------------------------------------------
# Outcomes and p-values


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float | None
    method: str
    test_id: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("asymptotic", "monte_carlo", "none"):
            raise ValueError(f"unknown calibration method {self.method!r}")
        if (self.p_value is None) != (self.method == "none"):
            raise ValueError("p_value must be present exactly when a calibration method is set")


PROJECTED_IDS = ("cvm", "ad", "rt")


def weight_of(test_id: str) -> WeightSpec | None:
    name = test_id.split(":")[0]
    if name in ("cvm", "ad", "rt", "rothman", "dirac"):
        return parse_weight(test_id)
    return None


def asymptotic_pvalue(statistic: float, test_id: str, q: int, query: TailQuery = TailQuery()) -> float:
    """Asymptotic null p-value of a statistic value."""
    x = float(statistic)
    name = test_id.split(":")[0]
    weight = weight_of(test_id)
    if weight is not None and not isinstance(weight, Dirac):
        return 1.0 if x <= 0 else algorithm1_pvalue(weight, q, x, query)
    if name == "ajne":
        return 1.0 if x <= 0 else algorithm1_pvalue(Rothman(0.5), q, x, query)
    if name == "watson":
        if q != 1:
            raise UnsupportedDimension("Watson's test is defined on the circle")
        return 1.0 if x <= 0 else algorithm1_pvalue(CvM(), 1, 2 * x, query)
    if name == "bakshaev" and q == 2:
        return 1.0 if x <= 0 else algorithm1_pvalue(CvM(), 2, x / 8, query)
    if name == "rayleigh":
        return float(stats.chi2.sf(x, q + 1))
    if name == "bingham":
        return float(stats.chi2.sf(x, (q + 1) * (q + 2) // 2 - 1))
    raise ValueError(f"no asymptotic null law available for {test_id!r} at q={q}; use Monte Carlo")


# ---------------------------------------------------------------------------
# Registry used by the Monte Carlo harness and the CLI


@dataclass(frozen=True)
class StatTest:
    """A statistic rejecting for large values, evaluated on a PairContext."""

    test_id: str
    func: Callable[[PairContext], np.ndarray]
    min_q: int = 1
    max_q: int | None = None

    def supports(self, q: int) -> bool:
        return q >= self.min_q and (self.max_q is None or q <= self.max_q)

    def __call__(self, sample):
        return self.func(_ctx(sample))


CCF09_DIRECTIONS = 50


@lru_cache(maxsize=32)
def ccf09_directions(q: int, seed: int, k: int = CCF09_DIRECTIONS) -> np.ndarray:
    return random_directions(k, q, np.random.default_rng([seed, 9]))


def get_test(test_id: str, seed: int = 0) -> StatTest:
    """Look up a test by identifier (``cvm``, ``ad``, ``rt``, ``rt:0.25``, ``rayleigh``, ...)."""
    name = test_id.split(":")[0]
    weight = weight_of(test_id)
    if weight is not None:
        return StatTest(test_id, lambda c, w=weight: stat_projected(c, w))
    table = {
        "ajne": StatTest("ajne", stat_ajne),
        "bakshaev": StatTest("bakshaev", stat_bakshaev),
        "rayleigh": StatTest("rayleigh", stat_rayleigh),
        "bingham": StatTest("bingham", stat_bingham),
        "gine": StatTest("gine", stat_gine, min_q=2),
        "watson": StatTest("watson", lambda c: stat_watson(np.arctan2(c.X[..., 1], c.X[..., 0])), max_q=1),
        "ccf09": StatTest("ccf09", lambda c: stat_ccf09(c.X, ccf09_directions(c.q, seed))),
    }
    if name not in table:
        raise ValueError(f"unknown test {test_id!r}")
    return table[name]


def run_test(sample, test_id: str, pvalue: str = "asymp", M: int = 10_000, seed: int = 0,
             query: TailQuery = TailQuery()) -> TestOutcome:
    """Statistic and p-value for one test; ``pvalue`` is 'asymp', 'mc' or 'none'."""
    ctx = _ctx(sample)
    test = get_test(test_id, seed)
    if not test.supports(ctx.q):
        raise UnsupportedDimension(f"{test_id} is not available for q={ctx.q}")
    params = {"q": ctx.q, "n": ctx.n}
    weight = weight_of(test_id)
    if isinstance(weight, Rothman):
        params["t"] = weight.t
    if test_id.startswith("ccf09"):
        out = ccf09_test(ctx.X, CCF09_DIRECTIONS, M, seed)
        if pvalue != "mc":
            return TestOutcome(out.statistic, None, "none", test_id, out.params)
        return out
    value = float(test(ctx))
    if pvalue == "none":
        return TestOutcome(value, None, "none", test_id, params)
    if pvalue == "asymp":
        if ctx.n < 2:
            raise ValueError("sample too small for asymptotic calibration")
        p = asymptotic_pvalue(value, test_id, ctx.q, query)
        if test_id.split(":")[0] not in ("rayleigh", "bingham"):
            params.update(K_max=query.K_max, delta=query.delta)
        return TestOutcome(value, p, "asymptotic", test_id, params)
    if pvalue == "mc":
        from .harness import null_statistics

        null = null_statistics([test_id], ctx.n, ctx.q, M, seed)[test_id]
        p = (1 + int(np.sum(null >= value))) / (M + 1)
        params.update(M=M, seed=seed)
        return TestOutcome(value, p, "monte_carlo", test_id, params)
    raise ValueError(f"unknown p-value method {pvalue!r}")
