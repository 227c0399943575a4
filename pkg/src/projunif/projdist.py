"""Law of the projection gamma'X of a uniform point X on the sphere of dimension q.

For X uniform on the q-sphere (embedded in R^{q+1}) and any fixed unit gamma,
t = gamma'X has density proportional to (1 - t^2)^{q/2 - 1} on [-1, 1].
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special


def _check_q(q):
    if int(q) != q or q < 1:
        raise ValueError(f"dimension q must be a positive integer, got {q!r}")


def proj_density(q: int, t):
    """Density f_q(t) = (1 - t^2)^{q/2 - 1} / B(1/2, q/2); +inf at t = +-1 when q = 1."""
    _check_q(q)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1):
        raise ValueError("t must lie in [-1, 1]")
    s = 1.0 - t * t
    with np.errstate(divide="ignore"):
        if q == 2:
            out = np.full_like(t, 0.5)
        else:
            out = np.exp((q / 2 - 1) * np.log(s) - special.betaln(0.5, q / 2))
    return out if out.ndim else float(out)


def proj_cdf(q: int, x):
    """F_q(x) = (1 + sign(x) I_{x^2}(1/2, q/2)) / 2."""
    _check_q(q)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise ValueError("x must lie in [-1, 1]")
    if q == 1:
        out = 1.0 - np.arccos(x) / math.pi
    elif q == 2:
        out = 0.5 * (x + 1.0)
    else:
        out = 0.5 * (1.0 + np.sign(x) * special.betainc(0.5, q / 2, x * x))
    out = np.where(x >= 1, 1.0, np.where(x <= -1, 0.0, out))
    return out if out.ndim else float(out)


def proj_sf(q: int, x):
    """1 - F_q(x), accurate in the upper tail."""
    _check_q(q)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise ValueError("x must lie in [-1, 1]")
    if q <= 2:
        out = 1.0 - np.asarray(proj_cdf(q, x)) if q == 2 else np.arccos(x) / math.pi
    else:
        ax = np.abs(x)
        small = 0.5 * special.betainc(q / 2, 0.5, (1 - ax) * (1 + ax))
        out = np.where(x >= 0, small, 1.0 - small)
    return out if np.ndim(out) else float(out)


def proj_quantile(q: int, p):
    """F_q^{-1}(p), exactly 0 at p = 1/2."""
    _check_q(q)
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    if q == 1:
        out = -np.cos(math.pi * p)
    elif q == 2:
        out = 2.0 * p - 1.0
    else:
        upper = np.abs(2.0 * p - 1.0)
        out = np.sign(p - 0.5) * np.sqrt(special.betaincinv(0.5, q / 2, upper))
        out = _polish(q, out, p)
    out = np.where(p == 0.5, 0.0, out)
    out = np.where(p >= 1, 1.0, np.where(p <= 0, -1.0, out))
    return out if out.ndim else float(out)


def _polish(q, x, p):
    """One safeguarded Newton step on F_q(x) = p using the analytic density."""
    inner = (np.abs(x) < 1) & (p > 0) & (p < 1)
    xi = np.where(inner, x, 0.0)
    f = proj_density(q, xi)
    step = np.where(inner & (f > 1e-12), (proj_cdf(q, xi) - p) / np.maximum(f, 1e-300), 0.0)
    cand = xi - step
    ok = np.abs(cand) < 1
    return np.where(inner & ok, cand, x)


def recurrence_step(q: int, x):
    """Increment F_q(x) - F_{q-2}(x) for q >= 3."""
    if q < 3:
        raise ValueError("the dimension recurrence needs q >= 3")
    x = np.asarray(x, dtype=float)
    return x * (1 - x * x) ** (q / 2 - 1) / ((q - 2) * math.exp(special.betaln(0.5, (q - 2) / 2)))
