"""Samplers on the sphere: uniform, rotationally symmetric alternatives, local alternatives.

Every non-uniform law here is rotationally symmetric about a direction mu, so a
draw is X = t mu + sqrt(1 - t^2) B_mu xi with t from a univariate density on
[-1, 1] and xi uniform on the sphere of one dimension lower.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math
from typing import Callable

import numpy as np
from scipy import interpolate
from scipy.special import gammaln

from .coeffs import K_MAX, _normalized_table, coeff_seq
from .kernels import AD, CvM, Rothman, WeightSpec, parse_weight
from .projdist import proj_density, proj_quantile
from .specfun import gauss_legendre
from .uniftests import UnitSample

log = logging.getLogger(__name__)

TABLE_POINTS = 2048
CELL_NODES = 8


@dataclass(frozen=True)
class RngStream:
    """Seed plus replicate index; each pair maps to its own independent generator."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def default_mu(q: int) -> np.ndarray:
    mu = np.zeros(q + 1)
    mu[-1] = 1.0
    return mu


def uniform_array(n: int, q: int, rng) -> np.ndarray:
    g = _rng(rng).standard_normal((n, q + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_uniform(n: int, q: int, rng) -> UnitSample:
    if n < 1:
        raise ValueError("n must be positive")
    return UnitSample(uniform_array(n, q, rng))


def householder_basis(mu) -> np.ndarray:
    """(q+1, q) matrix completing mu to an orthonormal basis.

    It is the first q columns of the Householder reflection sending e_{q+1} to mu.
    """
    mu = np.asarray(mu, dtype=float)
    mu = mu / np.linalg.norm(mu)
    p = mu.size
    e = np.zeros(p)
    e[-1] = 1.0
    v = e - mu
    H = np.eye(p)
    vv = v @ v
    if vv > 1e-30:
        H -= 2.0 * np.outer(v, v) / vv
    return H[:, :-1]


def tangent_normal(t, xi, mu) -> np.ndarray:
    """t mu + sqrt(1 - t^2) B_mu xi; vectorized over leading axes of t and xi."""
    t = np.asarray(t, dtype=float)
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    B = householder_basis(mu)
    s = np.sqrt(np.maximum(1.0 - t * t, 0.0))
    return t[..., None] * (mu / np.linalg.norm(mu)) + s[..., None] * (xi @ B.T)


# ---------------------------------------------------------------------------
# Inversion sampling of projected densities


class TangentTable:
    """Inverse-cdf table for the density g(t) (1 - t^2)^{q/2-1} on [-1, 1].

    Work in v = F_q(t), where the density becomes h(v) = g(F_q^{-1}(v)). The
    cdf is tabulated at TABLE_POINTS knots; inside each cell h is represented by
    the degree-7 polynomial through its 8 Gauss nodes, so the cdf is available
    in closed form between knots. Draws invert a monotone cubic through the
    knots and are then polished by Newton steps on the cell polynomial.
    """

    def __init__(self, g: Callable[[np.ndarray], np.ndarray], q: int, points: int = TABLE_POINTS):
        self.g, self.q = g, q
        knots = np.linspace(0.0, 1.0, points)
        rule = gauss_legendre(CELL_NODES)
        nodes, weights = rule.on(knots[:-1], knots[1:])
        vals = np.asarray(g(proj_quantile(q, nodes)), dtype=float)
        if np.any(vals < 0):
            log.warning("tangent density negative at %d nodes; clamped at 0", int(np.sum(vals < 0)))
            vals = np.maximum(vals, 0.0)
        cells = np.sum(weights * vals, axis=1)
        Z = float(np.sum(cells))
        if not math.isfinite(Z) or Z <= 0:
            raise ValueError("tangent density has non-finite or non-positive normalizing constant")
        self.Z = Z
        self.knots = knots
        self.half = 0.5 * (knots[1] - knots[0])
        # monomial coefficients in the local variable s in [-1, 1], normalized density
        V = np.vander(rule.nodes, CELL_NODES, increasing=True)
        self.poly = np.linalg.solve(V, vals.T / Z).T
        cdf = np.concatenate([[0.0], np.cumsum(cells) / Z])
        self.cdf = cdf
        # flat stretches of the cdf carry no mass; drop repeated values before inverting
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self._inverse = interpolate.PchipInterpolator(cdf[keep], knots[keep])

    def _local(self, j, s):
        """Normalized density and cdf increment from the left knot of cell j at local s."""
        c = self.poly[j]
        dens = np.zeros_like(s)
        anti = np.zeros_like(s)
        for m in range(CELL_NODES - 1, -1, -1):
            dens = dens * s + c[..., m]
            anti = anti * s + c[..., m] / (m + 1)
        anti = anti * s
        signs = (-1.0) ** (np.arange(CELL_NODES) + 1)
        at_left = np.sum(c * signs / np.arange(1, CELL_NODES + 1), axis=-1)
        return dens, self.half * (anti - at_left)

    def cdf_v(self, v):
        v = np.asarray(v, dtype=float)
        j = np.clip(np.searchsorted(self.knots, v, side="right") - 1, 0, len(self.knots) - 2)
        s = (v - self.knots[j]) / self.half - 1.0
        return self.cdf[j] + self._local(j, s)[1]

    def quantile_v(self, u, newton_steps: int = 3):
        u = np.asarray(u, dtype=float)
        v = np.clip(self._inverse(u), 0.0, 1.0)
        j = np.clip(np.searchsorted(self.cdf, u, side="right") - 1, 0, len(self.knots) - 2)
        target = u - self.cdf[j]
        s = np.clip((v - self.knots[j]) / self.half - 1.0, -1.0, 1.0)
        for _ in range(newton_steps):
            dens, inc = self._local(j, s)
            ok = dens > 1e-12
            step = np.where(ok, (inc - target) / (self.half * np.where(ok, dens, 1.0)), 0.0)
            s = np.clip(s - step, -1.0, 1.0)
        return np.clip(self.knots[j] + self.half * (s + 1.0), 0.0, 1.0)

    def sample(self, n: int, rng) -> np.ndarray:
        u = _rng(rng).random(n)
        return proj_quantile(self.q, self.quantile_v(u))


_TABLES: dict[tuple, TangentTable] = {}


def tangent_table(key, g, q: int) -> TangentTable:
    tab = _TABLES.get((key, q))
    if tab is None:
        tab = TangentTable(g, q)
        _TABLES[(key, q)] = tab
    return tab


def sample_tangent_density(g, q: int, rng, n: int = 1, key=None):
    """Draw t from the density proportional to g(t) (1 - t^2)^{q/2-1}.

    Tables are cached when a hashable ``key`` identifying g is given.
    """
    tab = tangent_table(key, g, q) if key is not None else TangentTable(g, q)
    out = tab.sample(n, rng)
    return float(out[0]) if n == 1 else out


# ---------------------------------------------------------------------------
# Truncated series for the locally most powerful alternatives


@dataclass(frozen=True, eq=False)
class FWSeries:
    """z -> 1 + sum_{k <= K_r} c_k P_k(z) with P_k = C_k^{(q-1)/2}, or T_k at q = 1."""

    q: int
    weight_key: str
    coef: np.ndarray  # c_1..c_{K_r}
    r: float
    K_max: int

    @property
    def K_r(self) -> int:
        return len(self.coef)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = np.ones_like(z)
        if self.q == 1:
            # T_k(z) = cos(k acos z)
            ang = np.arccos(np.clip(z, -1, 1))
            for k, c in enumerate(self.coef, start=1):
                out += c * np.cos(k * ang)
            return out
        lam = (self.q - 1) / 2
        prev, cur = np.ones_like(z), 2 * lam * z
        for m, c in enumerate(self.coef, start=1):
            if m > 1:
                prev, cur = cur, (2 * (m + lam - 1) * z * cur - (m + 2 * lam - 2) * prev) / m
            out += c * cur
        return out

    def norm2(self) -> float:
        """Squared norm of f - 1 under the weight (1 - z^2)^{q/2 - 1}."""
        k = np.arange(1, self.K_r + 1)
        return float(np.sum(self.coef**2 * np.exp(_log_norms(self.K_r, self.q))))


def _series_coefs(weight: WeightSpec, q: int, K_max: int) -> np.ndarray:
    b = np.maximum(coeff_seq(weight, q, K_max).b[1:], 0.0)
    k = np.arange(1, len(b) + 1, dtype=float)
    scale = 2.0 if q == 1 else 1 + 2 * k / (q - 1)
    c = np.sqrt(scale * b)
    if isinstance(weight, Rothman):
        # the Rothman alternative is a step in z; its coefficients carry the sign of
        # the normalized Gegenbauer polynomial of order (q+1)/2 at the jump
        x_t = np.array([proj_quantile(q, weight.t)])
        c = c * np.sign(_normalized_table(len(b), q, x_t)[:, 0])
    return c


def _log_norms(K: int, q: int) -> np.ndarray:
    k = np.arange(1, K + 1, dtype=float)
    if q == 1:
        return np.full(K, math.log(math.pi / 2))
    return (
        (3 - q) * math.log(2) + math.log(math.pi) + gammaln(q + k - 1)
        - np.log(q + 2 * k - 1) - gammaln(k + 1) - 2 * math.lgamma((q - 1) / 2)
    )


@lru_cache(maxsize=32)
def build_fW(weight: WeightSpec, q: int, r: float = 0.9995, K_max: int = K_MAX) -> FWSeries:
    """Truncated series of f^W keeping the first K_r terms that carry a fraction r of its norm."""
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    c = _series_coefs(weight, q, K_max)
    energy = np.cumsum(c * c * np.exp(_log_norms(len(c), q)))
    K_r = int(np.searchsorted(energy, r * energy[-1] * (1 - 1e-15))) + 1
    K_r = min(K_r, len(c))
    log.info("f^W series for %s, q=%d: K_r=%d of %d", weight.key, q, K_r, len(c))
    return FWSeries(q, weight.key, c[:K_r], r, K_max)


# ---------------------------------------------------------------------------
# Alternatives


@dataclass(frozen=True)
class Alternative:
    mu: tuple | None = field(default=None, kw_only=True)

    def direction(self, q: int) -> np.ndarray:
        if self.mu is None:
            return default_mu(q)
        mu = np.asarray(self.mu, dtype=float)
        if mu.size != q + 1:
            raise ValueError("mu has the wrong dimension")
        return mu / np.linalg.norm(mu)

    def draw_t(self, n: int, q: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(Alternative):
    def draw_t(self, n, q, rng):
        return proj_quantile(q, rng.random(n))


@dataclass(frozen=True)
class _Tabulated(Alternative):
    def g(self, t):
        raise NotImplementedError

    def table_key(self):
        return self

    def draw_t(self, n, q, rng):
        return tangent_table(self.table_key(), self.g, q).sample(n, rng)


@dataclass(frozen=True)
class VMF(_Tabulated):
    eta: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("vMF concentration must be non-negative")

    def g(self, t):
        return np.exp(self.eta * (t - 1.0))


@dataclass(frozen=True)
class WatsonDGP(_Tabulated):
    eta: float = 0.0

    def g(self, t):
        return np.exp(self.eta * (t * t - (1.0 if self.eta > 0 else 0.0)))


@dataclass(frozen=True)
class SmallCircle(_Tabulated):
    eta: float = 0.0
    tau: float = 0.5

    def __post_init__(self):
        if not -1 <= self.tau <= 1:
            raise ValueError("tau must lie in [-1, 1]")

    def g(self, t):
        d = (t - self.tau) ** 2
        peak = max(1 + abs(self.tau), 0) ** 2 if self.eta > 0 else 0.0
        return np.exp(self.eta * (d - peak))


def _mixture_draw(kappa, n, q, rng, draw_alt):
    t = proj_quantile(q, rng.random(n))
    alt = rng.random(n) < kappa
    m = int(alt.sum())
    if m:
        t[alt] = draw_alt(m)
    return t


@dataclass(frozen=True)
class LocalW(Alternative):
    """(1 - kappa) uniform + kappa f^W(x'mu) mixture."""

    weight: WeightSpec = CvM()
    kappa: float = 0.5
    r: float = 0.9995

    def __post_init__(self):
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if not 0 < self.r <= 1:
            raise ValueError("r must lie in (0, 1]")

    def draw_t(self, n, q, rng):
        series = build_fW(self.weight, q, self.r)
        tab = tangent_table(("fW", self.weight.key, q, self.r), series, q)
        return _mixture_draw(self.kappa, n, q, rng, lambda m: tab.sample(m, rng))


def rt_quantile(u, t: float, q: int):
    """Exact quantile of the projection under the density 1{z >= F_q^{-1}(t)} + t relative to F_q."""
    u = np.asarray(u, dtype=float)
    v = np.where(u > t * t, (u + t) / (1 + t), u / t)
    return proj_quantile(q, np.clip(v, 0.0, 1.0))


@dataclass(frozen=True)
class RtClosedForm(Alternative):
    t: float = 1 / 3
    kappa: float = 0.5

    def __post_init__(self):
        if not 0 < self.t < 1:
            raise ValueError("t must lie in (0, 1)")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")

    def draw_t(self, n, q, rng):
        return _mixture_draw(self.kappa, n, q, rng, lambda m: rt_quantile(rng.random(m), self.t, q))


def sample_array(spec: Alternative, n: int, q: int, rng) -> np.ndarray:
    rng = _rng(rng)
    if isinstance(spec, Uniform):
        return uniform_array(n, q, rng)
    t = np.clip(spec.draw_t(n, q, rng), -1.0, 1.0)
    g = rng.standard_normal((n, q))
    xi = g / np.linalg.norm(g, axis=1, keepdims=True)
    X = tangent_normal(t, xi, spec.direction(q))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def sample_alternative(spec: Alternative, n: int, q: int, rng) -> UnitSample:
    if n < 1:
        raise ValueError("n must be positive")
    return UnitSample(sample_array(spec, n, q, rng), meta={"spec": spec})


DGP_NAMES = ("uniform", "vmf", "wat", "sc", "cvm", "ad", "rt")


def dgp_preset(name: str, kappa: float) -> Alternative:
    """Named alternatives indexed by a common deviation parameter kappa.

    vmf: eta = kappa; wat: eta = 2.5 kappa; sc: eta = -1.5 kappa, tau = 0.5;
    cvm/ad/rt: local alternatives with mixture weight kappa (rt uses t = 1/3).
    kappa = 0 gives the uniform law for every name.
    """
    name = name.lower()
    if name == "uniform" or kappa == 0:
        if name not in DGP_NAMES:
            raise ValueError(f"unknown alternative {name!r}")
        return Uniform()
    if name == "vmf":
        return VMF(eta=kappa)
    if name == "wat":
        return WatsonDGP(eta=2.5 * kappa)
    if name == "sc":
        return SmallCircle(eta=-1.5 * kappa, tau=0.5)
    if name in ("cvm", "ad", "rt"):
        weight = {"cvm": CvM(), "ad": AD(), "rt": Rothman(1 / 3)}[name]
        return LocalW(weight=weight, kappa=kappa)
    raise ValueError(f"unknown alternative {name!r}")


def parse_alternative(text: str) -> Alternative:
    """'vmf:eta=2', 'wat:eta=-1', 'sc:eta=-1,tau=0.5', 'local:w=cvm,kappa=0.5', 'rtcf:t=0.33,kappa=0.5', 'uniform'."""
    name, _, rest = text.partition(":")
    kw = dict(item.split("=", 1) for item in rest.split(",") if item)
    name = name.lower()
    if name == "uniform":
        return Uniform()
    if name == "vmf":
        return VMF(eta=float(kw.get("eta", 0)))
    if name == "wat":
        return WatsonDGP(eta=float(kw.get("eta", 0)))
    if name == "sc":
        return SmallCircle(eta=float(kw.get("eta", 0)), tau=float(kw.get("tau", 0.5)))
    if name == "local":
        return LocalW(parse_weight(kw.get("w", "cvm")), float(kw.get("kappa", 0.5)), float(kw.get("r", 0.9995)))
    if name == "rtcf":
        return RtClosedForm(float(kw.get("t", 1 / 3)), float(kw.get("kappa", 0.5)))
    raise ValueError(f"unknown alternative {text!r}")


def projected_density(spec: Alternative, q: int):
    """Density of t = mu'X on [-1, 1] for tabulated and local alternatives (for goodness-of-fit checks)."""
    if isinstance(spec, Uniform):
        return lambda t: proj_density(q, t)
    if isinstance(spec, _Tabulated):
        tab = tangent_table(spec.table_key(), spec.g, q)
        return lambda t: np.maximum(spec.g(t), 0) / tab.Z * proj_density(q, t)
    if isinstance(spec, LocalW):
        series = build_fW(spec.weight, q, spec.r)
        tab = tangent_table(("fW", spec.weight.key, q, spec.r), series, q)
        return lambda t: ((1 - spec.kappa) + spec.kappa * np.maximum(series(t), 0) / tab.Z) * proj_density(q, t)
    raise ValueError("no tabulated density for this alternative")


__all__ = [
    "RngStream", "sample_uniform", "uniform_array", "householder_basis", "tangent_normal",
    "TangentTable", "sample_tangent_density", "FWSeries", "build_fW", "Alternative", "Uniform",
    "VMF", "WatsonDGP", "SmallCircle", "LocalW", "RtClosedForm", "rt_quantile", "sample_array",
    "sample_alternative", "dgp_preset", "parse_alternative", "projected_density",
]
