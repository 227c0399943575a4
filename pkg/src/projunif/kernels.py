"""Cap intersections A(theta, x) and the U-statistic kernels psi_q^W.

A(theta, x) is the probability, over a uniform direction gamma, that both
gamma'X_i <= x and gamma'X_j <= x when X_i and X_j are theta apart. Every
projected-ecdf kernel is an integral of A against the weight W in F_q
coordinates; the closed forms below are special cases of that integral.

Integrals over [x, cos(theta/2)] have a (c - t)^{(q-1)/2} endpoint behaviour
coming from F_{q-1} at argument 1. They are evaluated after the substitution
t = c - (c - x) s^2, which turns that factor into a polynomial in s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .projdist import proj_cdf, proj_density, proj_quantile, proj_sf
from .specfun import gauss_legendre

KERNEL_NODES = 160
TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# Weights


class WeightSpec:
    """Base class for the measures W indexing a projected-ecdf statistic."""

    key: str

    def bias(self, n: int) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class CvM(WeightSpec):
    """W(u) = u."""

    @property
    def key(self):
        return "cvm"

    def bias(self, n):
        return (3 - 2 * n) / 6


@dataclass(frozen=True)
class AD(WeightSpec):
    """dW(u) = du / (u(1 - u))."""

    @property
    def key(self):
        return "ad"

    def bias(self, n):
        return float(n)


@dataclass(frozen=True)
class Rothman(WeightSpec):
    """Two atoms of mass 1/2 at t and 1 - t."""

    t: float

    def __post_init__(self):
        if not 0 < self.t < 1:
            raise ValueError("Rothman t must lie in (0, 1)")

    @property
    def t_m(self):
        return min(self.t, 1 - self.t)

    @property
    def key(self):
        return f"rt:{self.t!r}"

    def bias(self, n):
        return (1 - n) / 2 + n * self.t * (1 - self.t)


@dataclass(frozen=True)
class Dirac(WeightSpec):
    """A single atom at u; the kernel is A(theta, F_q^{-1}(u)) without symmetrization."""

    u: float

    def __post_init__(self):
        if not 0 < self.u <= 1:
            raise ValueError("Dirac atom must lie in (0, 1]")

    @property
    def key(self):
        return f"dirac:{self.u!r}"

    def bias(self, n):
        return self.u * (1 - n * self.u)


@dataclass(frozen=True)
class DensityCdf(WeightSpec):
    """A continuous probability cdf W on [0, 1], symmetrized as (W(u) + 1 - W(1 - u))/2.

    The statistic only depends on W through its symmetrization, so both the
    kernel and the bias use the symmetrized measure. ``name`` keys caches and
    must identify W uniquely.
    """

    W: Callable = field(compare=False)
    name: str = "density"

    @property
    def key(self):
        return f"cdf:{self.name}"

    def sym(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * (np.asarray(self.W(u), dtype=float) + 1.0 - np.asarray(self.W(1.0 - u), dtype=float))

    def bias(self, n):
        # int u^2 dW~ = 1 - 2 int u W~(u) du
        m2 = 1.0 - 2.0 * integrate.quad(lambda u: u * float(self.sym(u)), 0, 1, limit=200)[0]
        return 0.5 - n * m2


def parse_weight(text: str) -> WeightSpec:
    """Parse identifiers such as ``cvm``, ``ad``, ``rt``, ``rt:0.25``, ``dirac:0.5``."""
    name, _, arg = text.strip().lower().partition(":")
    if name == "cvm":
        return CvM()
    if name == "ad":
        return AD()
    if name in ("rt", "rothman"):
        return Rothman(float(arg) if arg else 1 / 3)
    if name == "dirac":
        return Dirac(float(arg))
    raise ValueError(f"unknown weight {text!r}")


# ---------------------------------------------------------------------------
# Quadrature helpers


def _slope(theta):
    with np.errstate(over="ignore", divide="ignore"):
        return np.tan(0.5 * theta)


def _inner_arg(t, slope):
    """t tan(theta/2) / sqrt(1 - t^2), clipped into [-1, 1]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        y = t * slope / np.sqrt(1.0 - t * t)
    return np.clip(np.nan_to_num(y, nan=1.0, posinf=1.0), -1.0, 1.0)


def _anchored_rule(lo, c, order):
    """Nodes t and weights dt for an integral over [lo, c], via t = c - (c - lo) s^2."""
    rule = gauss_legendre(order)
    s, ws = rule.on(0.0, 1.0)
    lo = np.asarray(lo, dtype=float)[..., None]
    c = np.asarray(c, dtype=float)[..., None]
    span = c - lo
    t = c - span * s * s
    return t, 2.0 * span * s * ws


def _upper_tail(q, theta, t):
    """1 - F_{q-1}(t tan(theta/2)/sqrt(1 - t^2)) with theta on a leading axis."""
    return 1.0 - proj_cdf(q - 1, _inner_arg(t, _slope(theta)[..., None]))


# ---------------------------------------------------------------------------
# Cap intersection


def cap_intersection(q: int, theta, x, order: int = KERNEL_NODES):
    """A(theta, x) for angles theta in [0, pi] and thresholds x in [-1, 1] (broadcast)."""
    theta, x = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(x, dtype=float))
    shape = theta.shape
    theta, x = theta.reshape(-1), x.reshape(-1)
    ax = np.abs(x)
    F = np.asarray(proj_cdf(q, ax))
    if q == 1:
        out = 2 * F - 1 + np.maximum(np.arccos(ax) - 0.5 * theta, 0.0) / math.pi
    else:
        c = np.cos(0.5 * theta)
        out = 2 * F - 1
        open_ = ax < c
        if np.any(open_):
            th, cc, lo = theta[open_], c[open_], ax[open_]
            t, dt = _anchored_rule(lo, cc, order)
            inner = proj_cdf(q - 1, _inner_arg(t, _slope(th)[:, None]))
            integral = np.sum(inner * proj_density(q, t) * dt, axis=-1)
            out[open_] = 2 * proj_cdf(q, cc) - 1 - 2 * integral
    out = np.where(x < 0, out + 1 - 2 * F, out)
    return _out(np.clip(out, 0.0, 1.0).reshape(shape))


# ---------------------------------------------------------------------------
# Kernels


def _theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < 0) | (theta > math.pi + 1e-12)):
        raise ValueError("angles must lie in [0, pi]")
    return np.minimum(theta, math.pi)


def _out(arr):
    arr = np.asarray(arr, dtype=float)
    return arr if arr.ndim else float(arr)


def _weighted_tail_integral(q, theta, g, order):
    """4 int_0^{cos(theta/2)} g(t) (1 - F_{q-1}(y(t))) f_q(t) dt, vectorized over theta."""
    flat = theta.reshape(-1)
    c = np.cos(0.5 * flat)
    t, dt = _anchored_rule(np.zeros_like(c), c, order)
    tail = _upper_tail(q, flat, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(tail > 0, g(t) * tail * proj_density(q, t) * dt, 0.0)
    return 4.0 * np.sum(vals, axis=-1).reshape(theta.shape)


def psi_cvm(q: int, theta, method: str = "closed", order: int = KERNEL_NODES):
    """Cramer-von Mises kernel. ``method='generic'`` forces the quadrature form for q >= 2."""
    theta = _theta(theta)
    tb = theta / TWO_PI
    if q == 1:
        return _out(0.5 + tb * (tb - 1))
    if method == "closed" and q == 2:
        return _out(0.5 - 0.25 * np.sin(0.5 * theta))
    if method == "closed" and q == 3:
        e = math.pi - theta
        # (pi - theta) tan(theta/2) = e / tan(e/2), which tends to 2 as e -> 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(e > 1e-8, e / np.tan(0.5 * np.maximum(e, 1e-8)), 2.0 - e * e / 6)
        return _out(0.5 + tb * (tb - 1) + (ratio - 2 * np.sin(0.5 * theta) ** 2) / (4 * math.pi**2))
    flat = theta.reshape(-1)
    c = np.cos(0.5 * flat)
    t, dt = _anchored_rule(np.zeros_like(c), c, order)
    Ft = proj_cdf(q, t)
    inner = 1.0 - _upper_tail(q, flat, t)
    integral = np.sum(Ft * inner * proj_density(q, t) * dt, axis=-1)
    val = -0.75 + flat / TWO_PI + 2 * proj_cdf(q, c) ** 2 - 4 * integral
    return _out(val.reshape(theta.shape))


def rothman_cutoff(q: int, t: float) -> float:
    """theta_{t_m} = 2 acos(F_q^{-1}(1 - t_m)); the Rothman kernel is constant beyond it."""
    t_m = min(t, 1 - t)
    return 2 * math.acos(proj_quantile(q, 1 - t_m))


def psi_rothman(q: int, theta, t: float, method: str = "closed", order: int = KERNEL_NODES):
    """Rothman kernel with parameter t (symmetric in t <-> 1 - t)."""
    theta = _theta(theta)
    t_m = min(t, 1 - t)
    tb = theta / TWO_PI
    if q == 1:
        h = np.maximum(t_m - tb, 0.0) - t_m**2
        return _out(h + 0.5 - t_m * (1 - t_m))
    cut = rothman_cutoff(q, t)
    flat = theta.reshape(-1)
    out = np.full(flat.shape, 0.5 - t_m)
    inside = flat < cut
    th = flat[inside]
    if method == "closed" and q == 2:
        half = 0.5 * th
        arg = (0.5 - t_m) * np.tan(half) / math.sqrt(t_m * (1 - t_m))
        root = np.sqrt(np.maximum(np.cos(half) ** 2 - (1 - 2 * t_m) ** 2, 0.0))
        with np.errstate(divide="ignore"):
            at = np.arctan2(root, np.sin(half))
        out[inside] = (
            0.5 - t_m - (1 - 2 * t_m) / math.pi * np.arccos(np.clip(arg, -1, 1)) + at / math.pi
        )
    elif method == "closed" and q == 3:
        out[inside] = (
            0.5
            + t_m
            - (th + cut) / TWO_PI
            + (0.5 * math.sin(cut) + np.tan(0.5 * th) * math.cos(0.5 * cut) ** 2) / math.pi
        )
    else:
        # psi = (A(theta, x) + A(theta, -x))/2 with x = F_q^{-1}(t_m), and
        # A(theta, -x) = A(theta, x) + 1 - 2 t_m.
        x = proj_quantile(q, 1 - t_m)
        out[inside] = cap_intersection(q, th, x, order) + t_m - 0.5
    return _out(out.reshape(theta.shape))


def psi_ad(q: int, theta, method: str = "closed", order: int = KERNEL_NODES):
    """Anderson-Darling kernel, with psi(0) = 0."""
    theta = _theta(theta)
    flat = theta.reshape(-1)
    out = np.zeros(flat.shape)
    pos = flat > 0
    th = flat[pos]
    if q == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            rest = TWO_PI - th
            val = -2 * math.log(TWO_PI) + (th * np.log(th) + rest * np.log(rest)) / math.pi
        out[pos] = val
        return _out(out.reshape(theta.shape))
    if method == "closed" and q == 2:
        c = np.cos(0.5 * th)
        t, dt = _anchored_rule(np.zeros_like(c), c, order)
        y = _inner_arg(t, _slope(th)[:, None])
        integrand = np.log((1 + t) / (1 - t)) * np.arccos(y)
        out[pos] = -math.log(4) + (2 / math.pi) * np.sum(integrand * dt, axis=-1)
    elif method == "closed" and q == 3:
        th2 = th * th
        s = np.where(th > 1e-3, th - np.sin(th), th * th2 / 6 * (1 - th2 / 20 * (1 - th2 / 42)))
        with np.errstate(divide="ignore", invalid="ignore"):
            rest = TWO_PI - s
            slog = np.where(s > 0, s * np.log(s), 0.0)
            head = -2 * math.log(TWO_PI) + (slog + rest * np.log(rest)) / math.pi
        c = np.cos(0.5 * th)
        t, dt = _anchored_rule(np.zeros_like(c), c, order)
        cap = np.arccos(t) - t * np.sqrt(1 - t * t)
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(cap > 0, t * np.log(math.pi / cap - 1), 0.0)
        out[pos] = head - (4 / math.pi) * np.tan(0.5 * th) * np.sum(integrand * dt, axis=-1)
    else:
        def logit(t):
            return np.log(proj_cdf(q, t)) - np.log(proj_sf(q, t))

        out[pos] = -math.log(4) + _weighted_tail_integral(q, th, logit, order)
    return _out(out.reshape(theta.shape))


def psi_generic(q: int, theta, weight: WeightSpec, order: int = KERNEL_NODES):
    """psi_q^W by the general integral representations.

    Continuous cdfs (CvM, DensityCdf) use the W-integral over [0, cos(theta/2)];
    atom weights integrate A(theta, x) against their atoms; AD uses its
    logit-weighted form.
    """
    theta = _theta(theta)
    if isinstance(weight, Dirac):
        return cap_intersection(q, theta, proj_quantile(q, weight.u), order)
    if isinstance(weight, Rothman):
        x = proj_quantile(q, weight.t_m)
        return _out(0.5 * (cap_intersection(q, theta, x, order) + cap_intersection(q, theta, -x, order)))
    if isinstance(weight, AD):
        return psi_ad(q, theta, method="generic", order=order)
    if isinstance(weight, CvM):
        W = lambda u: u  # noqa: E731
    elif isinstance(weight, DensityCdf):
        W = weight.sym
    else:
        raise TypeError(f"unsupported weight {weight!r}")
    tb = theta / TWO_PI
    rule = gauss_legendre(order)
    if q == 1:
        u, wu = rule.on(0.0, tb)
        return _out(0.5 - tb + 2 * np.sum(W(u) * wu, axis=-1))
    u, wu = rule.on(0.0, 0.5)
    half_mass = 2 * float(np.sum(W(u) * wu))
    tail = _weighted_tail_integral(q, theta, lambda t: W(proj_cdf(q, t)), order)
    return _out(-0.5 + tb + half_mass + tail)


def psi(q: int, theta, weight: WeightSpec, order: int = KERNEL_NODES):
    """Kernel by the most specific available route."""
    if isinstance(weight, CvM):
        return psi_cvm(q, theta, order=order)
    if isinstance(weight, AD):
        return psi_ad(q, theta, order=order)
    if isinstance(weight, Rothman):
        return psi_rothman(q, theta, weight.t, order=order)
    if isinstance(weight, Dirac) and weight.u == 0.5:
        return _out(0.5 - _theta(theta) / TWO_PI)
    return psi_generic(q, theta, weight, order)


# ---------------------------------------------------------------------------
# Fast evaluation for statistics


def _closed_form(q, weight):
    if isinstance(weight, CvM):
        return q <= 3
    if isinstance(weight, Rothman):
        return q <= 3
    if isinstance(weight, AD):
        return q == 1
    if isinstance(weight, Dirac):
        return weight.u == 0.5 or q == 1
    return False


def _kink(q, weight):
    """Angle beyond which the kernel is constant, if any."""
    if isinstance(weight, Rothman):
        return rothman_cutoff(q, weight.t)
    if isinstance(weight, Dirac):
        return 2 * math.acos(abs(proj_quantile(q, weight.u)))
    return math.pi


@dataclass(frozen=True, eq=False)
class Kernel:
    """Vectorized theta -> psi(theta) used inside statistics.

    Closed forms are evaluated directly. Quadrature-backed kernels are
    tabulated once on a uniform grid in s = sqrt(theta / end) (dense near
    theta = 0, where the AD kernel behaves like theta log theta) and evaluated
    as a piecewise cubic spline; beyond a constant-branch cutoff ``end`` the
    exact constant is returned.
    """

    q: int
    weight: WeightSpec
    coef: np.ndarray | None = None
    end: float = math.pi
    tail_value: float = 0.0

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.coef is None:
            return psi(self.q, theta, self.weight)
        cells = self.coef.shape[1]
        pos = np.sqrt(np.minimum(theta, self.end) * (cells * cells / self.end))
        idx = np.minimum(pos.astype(np.intp), cells - 1)
        h = pos - idx
        c = self.coef
        out = ((c[0].take(idx) * h + c[1].take(idx)) * h + c[2].take(idx)) * h + c[3].take(idx)
        if self.end < math.pi:
            out = np.where(theta >= self.end, self.tail_value, out)
        return out


TABLE_CELLS = 4096


@lru_cache(maxsize=64)
def get_kernel(q: int, weight: WeightSpec) -> Kernel:
    """Kernel evaluator for statistics, cached per (q, weight)."""
    if _closed_form(q, weight):
        return Kernel(q, weight)
    end = _kink(q, weight)
    s = np.linspace(0.0, 1.0, TABLE_CELLS + 1)
    vals = np.asarray(psi(q, end * s * s, weight), dtype=float)
    tail = float(psi(q, math.pi, weight))
    spline = CubicSpline(np.arange(TABLE_CELLS + 1.0), vals)
    coef = np.ascontiguousarray(spline.c)
    coef.setflags(write=False)
    return Kernel(q, weight, coef, end, tail)
