"""Special functions and quadrature used throughout the package.

Everything here is a pure function of its inputs. Arrays are accepted wherever
a scalar makes sense and results broadcast in the usual numpy way.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import special

# Flag for the q = 1 Chebyshev basis, which replaces C_k^0.
CHEBYSHEV = None


def _check_params(a, b):
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise ValueError("incomplete beta parameters must be positive")


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta function I_x(a, b)."""
    x = np.asarray(x, dtype=float)
    _check_params(a, b)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise ValueError("x must lie in [0, 1]")
    out = special.betainc(a, b, x)
    return out if out.ndim else float(out)


def reg_inc_beta_inv(p, a, b):
    """Inverse of ``reg_inc_beta`` in its first argument."""
    p = np.asarray(p, dtype=float)
    _check_params(a, b)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p must lie in [0, 1]")
    out = special.betaincinv(a, b, p)
    return out if out.ndim else float(out)


def log_beta(a, b):
    return special.betaln(a, b)


def gegenbauer(k: int, lam, z):
    """C_k^lam(z) by the three-term recurrence; ``lam=CHEBYSHEV`` gives T_k(z)."""
    z = np.asarray(z, dtype=float)
    if k < 0:
        raise ValueError("degree must be non-negative")
    if lam is CHEBYSHEV:
        prev, cur = np.ones_like(z), z.copy()
        if k == 0:
            return _scalar(prev)
        for _ in range(1, k):
            prev, cur = cur, 2.0 * z * cur - prev
        return _scalar(cur)
    if lam <= 0:
        raise ValueError("Gegenbauer order must be positive")
    prev, cur = np.ones_like(z), 2.0 * lam * z
    if k == 0:
        return _scalar(prev)
    for m in range(2, k + 1):
        prev, cur = cur, (2.0 * (m + lam - 1) * z * cur - (m + 2 * lam - 2) * prev) / m
    return _scalar(cur)


def gegenbauer_table(K: int, lam, z) -> np.ndarray:
    """Rows C_0(z), ..., C_K(z) stacked into an array of shape (K + 1, *z.shape)."""
    z = np.asarray(z, dtype=float)
    out = np.empty((K + 1,) + z.shape)
    out[0] = 1.0
    if K == 0:
        return out
    if lam is CHEBYSHEV:
        out[1] = z
        for m in range(2, K + 1):
            out[m] = 2.0 * z * out[m - 1] - out[m - 2]
    else:
        out[1] = 2.0 * lam * z
        for m in range(2, K + 1):
            out[m] = (2.0 * (m + lam - 1) * z * out[m - 1] - (m + 2 * lam - 2) * out[m - 2]) / m
    return out


def gegenbauer_order(q: int):
    """Basis order (q - 1)/2 for dimension q, or the Chebyshev flag at q = 1."""
    return CHEBYSHEV if q == 1 else (q - 1) / 2


def gegenbauer_norm(k: int, q: int) -> float:
    """Squared norm c_{k,q} of C_k^{(q-1)/2} under the weight (1 - z^2)^{q/2 - 1}."""
    if q == 1:
        return math.pi if k == 0 else math.pi / 2
    log_c = (
        (3 - q) * math.log(2)
        + math.log(math.pi)
        + math.lgamma(q + k - 1)
        - math.log(q + 2 * k - 1)
        - math.lgamma(k + 1)
        - 2 * math.lgamma((q - 1) / 2)
    )
    return math.exp(log_c)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def on(self, lo, hi):
        """Nodes and weights mapped to [lo, hi]; ``lo``/``hi`` may be arrays (broadcast on a new last axis)."""
        lo = np.asarray(lo, dtype=float)[..., None]
        hi = np.asarray(hi, dtype=float)[..., None]
        half = 0.5 * (hi - lo)
        return lo + half * (self.nodes + 1.0), half * self.weights


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1] by Newton iteration on P_order."""
    if order < 1:
        raise ValueError("order must be positive")
    n = order
    m = (n + 1) // 2
    i = np.arange(1, m + 1)
    # Tricomi's asymptotic guesses for the positive roots, largest first.
    x = (1 - (n - 1) / (8.0 * n**3)) * np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p0, p1 = np.ones_like(x), x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p0, p1 = np.ones_like(x), x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1)
    w = 2.0 / ((1 - x * x) * dp * dp)
    if n % 2:
        x[-1] = 0.0
    nodes = np.concatenate([-x, x[: n // 2][::-1]])
    weights = np.concatenate([w, w[: n // 2][::-1]])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, n)


def hyp4f3_terms(k: int, q: int) -> np.ndarray:
    """Signed terms of the terminating 4F3(1-k, q+k, (q+1)/2, 3q/2; q+1, q/2+1, (3q+1)/2; 1).

    Each term is the exponential of a sum of log-gamma differences, with the
    sign of the (1-k)_j factor tracked separately.
    """
    if k < 1:
        raise ValueError("k must be positive")
    num = (q + k, (q + 1) / 2, 1.5 * q)
    den = (q + 1, q / 2 + 1, (3 * q + 1) / 2)
    terms = np.empty(k)
    for j in range(k):
        # (1-k)_j / j! = (-1)^j (k-1)! / ((k-1-j)! j!)
        log_t = math.lgamma(k) - math.lgamma(k - j) - math.lgamma(j + 1)
        for a in num:
            log_t += math.lgamma(a + j) - math.lgamma(a)
        for b in den:
            log_t -= math.lgamma(b + j) - math.lgamma(b)
        terms[j] = (-1.0) ** j * math.exp(log_t)
    return terms


def hyp4f3_unit(k: int, q: int) -> float:
    """Value of the terminating 4F3 sum at unit argument."""
    return math.fsum(hyp4f3_terms(k, q))


def _scalar(arr):
    return arr if np.ndim(arr) else float(arr)
