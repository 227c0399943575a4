"""Gegenbauer coefficients of cap intersections and kernels.

For q >= 2 the coefficient a_{k,q}^x involves Gamma(k)/Gamma(k+q) times
C_{k-1}^{(q+1)/2}(x), which under- and overflow separately for large k. Both
are folded into the normalized polynomial R_m(x) = C_m^lam(x) / C_m^lam(1),
bounded by 1 on [-1, 1] and generated by

    R_m = (2 (m + lam - 1) x R_{m-1} - (m - 1) R_{m-2}) / (m + 2 lam - 1),

which gives a_{k,q}^x = (1 + 2k/(q-1)) * kappa_q * (1 - x^2)^q * R_{k-1}(x)^2 with
kappa_q = (2^{q-1} Gamma((q+1)/2)^2 / (pi q!))^2.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import os
from pathlib import Path
import struct
from typing import Iterable

import numpy as np
from scipy import special

from .kernels import AD, CvM, DensityCdf, Dirac, Rothman, WeightSpec
from .projdist import proj_cdf, proj_quantile
from .specfun import gauss_legendre, hyp4f3_terms, hyp4f3_unit

COEFF_NODES = 5120
K_MAX = 50_000
CACHE_ENV = "PROJUNIF_CACHE_DIR"


@dataclass(frozen=True)
class CoeffSeq:
    """Coefficients b_0, ..., b_K of a kernel for dimension q."""

    q: int
    weight_key: str
    b: np.ndarray

    @property
    def K(self) -> int:
        return len(self.b) - 1

    def truncate(self, K: int) -> "CoeffSeq":
        if K > self.K:
            raise ValueError(f"sequence only has {self.K} terms")
        return CoeffSeq(self.q, self.weight_key, self.b[: K + 1])


@dataclass(frozen=True)
class ChiSqMixture:
    """The law of sum_k w_k Y_k with independent Y_k ~ chi^2_{d_k}; zero weights are dropped."""

    w: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if w.shape != d.shape:
            raise ValueError("weights and degrees of freedom must align")
        if np.any(w < 0) or np.any(d <= 0):
            raise ValueError("mixture weights must be non-negative and dofs positive")
        keep = w > 0
        object.__setattr__(self, "w", w[keep])
        object.__setattr__(self, "d", d[keep])

    def mean(self) -> float:
        return float(np.sum(self.w * self.d))

    def cumulants(self):
        wd = self.w * self.d
        return (
            float(np.sum(wd)),
            2.0 * float(np.sum(wd * self.w)),
            8.0 * float(np.sum(wd * self.w * self.w)),
        )


# ---------------------------------------------------------------------------
# Multiplicities and a_{k,q}^x


def eigen_dim(k: int, q: int) -> int:
    """d_{k,q} = C(q+k-2, q-1) + C(q+k-1, q-1); equals 2 on the circle."""
    if k < 1:
        raise ValueError("k must be positive")
    if q == 1:
        return 2
    return math.comb(q + k - 2, q - 1) + math.comb(q + k - 1, q - 1)


def eigen_dims(K: int, q: int) -> np.ndarray:
    """d_{1,q}, ..., d_{K,q} as floats (exact up to double rounding)."""
    if q == 1:
        return np.full(K, 2.0)
    k = np.arange(1, K + 1, dtype=float)
    # d_{k,q} = (2k + q - 1) (k + q - 2)! / (k! (q - 1)!)
    logd = np.log(2 * k + q - 1) + special.gammaln(k + q - 1) - special.gammaln(k + 1) - math.lgamma(q)
    out = np.exp(logd)
    small = min(K, 200)
    out[:small] = [float(eigen_dim(j, q)) for j in range(1, small + 1)]
    return out


def _kappa(q: int) -> float:
    return math.exp(2 * ((q - 1) * math.log(2) + 2 * math.lgamma((q + 1) / 2) - math.log(math.pi) - math.lgamma(q + 1)))


def _normalized_table(K: int, q: int, x: np.ndarray) -> np.ndarray:
    """R_0(x), ..., R_{K-1}(x) for order lam = (q+1)/2, shape (K, len(x))."""
    lam = (q + 1) / 2
    out = np.empty((max(K, 1), x.size))
    out[0] = 1.0
    if K > 1:
        out[1] = x
    for m in range(2, K):
        out[m] = (2 * (m + lam - 1) * x * out[m - 1] - (m - 1) * out[m - 2]) / (m + 2 * lam - 1)
    return out[:K]


def a_coeff(k: int, q: int, x):
    """a_{k,q}^x, the k-th Gegenbauer coefficient of theta -> A(theta, x)."""
    x = np.asarray(x, dtype=float)
    if k == 0:
        out = np.asarray(proj_cdf(q, x)) ** 2
    elif q == 1:
        out = (1 - np.cos(2 * k * np.arccos(x))) / (k * k * math.pi**2)
    else:
        R = _normalized_table(k, q, x.reshape(-1))[k - 1].reshape(x.shape)
        out = (1 + 2 * k / (q - 1)) * _kappa(q) * (1 - x * x) ** q * R * R
    return out if out.ndim else float(out)


def a_coeff_table(K: int, q: int, x) -> np.ndarray:
    """a_{k,q}^x for k = 0..K along the first axis."""
    x = np.asarray(x, dtype=float).reshape(-1)
    out = np.empty((K + 1, x.size))
    out[0] = np.asarray(proj_cdf(q, x)) ** 2
    if K == 0:
        return out
    k = np.arange(1, K + 1)[:, None]
    if q == 1:
        out[1:] = (1 - np.cos(2 * k * np.arccos(x)[None, :])) / (k * k * math.pi**2)
    else:
        R = _normalized_table(K, q, x)
        out[1:] = (1 + 2 * k / (q - 1)) * _kappa(q) * (1 - x * x) ** q * R * R
    return out


# ---------------------------------------------------------------------------
# Generic coefficients by quadrature in u = F_q(x)


def _measure_nodes(weight: WeightSpec, q: int, order: int):
    """Points x_i and masses m_i with sum_i m_i g(x_i) ~ int g(x) dW(F_q(x))."""
    if isinstance(weight, Dirac):
        return np.array([proj_quantile(q, weight.u)]), np.array([1.0])
    if isinstance(weight, Rothman):
        x = proj_quantile(q, weight.t_m)
        return np.array([x, -x]), np.array([0.5, 0.5])
    u, wu = gauss_legendre(order).on(0.0, 1.0)
    if isinstance(weight, CvM):
        dens = np.ones_like(u)
    elif isinstance(weight, AD):
        dens = 1.0 / (u * (1 - u))
    elif isinstance(weight, DensityCdf):
        h = 1e-6
        lo, hi = np.maximum(u - h, 0.0), np.minimum(u + h, 1.0)
        dens = (weight.sym(hi) - weight.sym(lo)) / (hi - lo)
    else:
        raise TypeError(f"unsupported weight {weight!r}")
    return np.asarray(proj_quantile(q, u)), wu * dens


def b_coeffs_generic(weight: WeightSpec, K: int, q: int, order: int = COEFF_NODES) -> np.ndarray:
    """b_{k,q}^W = int a_{k,q}^x dW(F_q(x)) for k = 1..K (index 0 of the result is k = 1).

    For AD the integrand a/(u(1-u)) stays bounded at u -> 0, 1 because
    a_{k,q}^x vanishes like (1 - x^2)^q there.
    """
    x, m = _measure_nodes(weight, q, order)
    out = np.empty(K)
    if q == 1:
        theta = np.arccos(np.clip(x, -1, 1))
        chunk = max(1, 2_000_000 // x.size)
        for start in range(1, K + 1, chunk):
            k = np.arange(start, min(K, start + chunk - 1) + 1)[:, None]
            vals = (1 - np.cos(2 * k * theta[None, :])) @ m
            out[start - 1 : start - 1 + len(k)] = vals / (k[:, 0] ** 2 * math.pi**2)
        return out
    lam = (q + 1) / 2
    base = _kappa(q) * (1 - x * x) ** q * m
    prev, cur = np.zeros_like(x), np.ones_like(x)
    for k in range(1, K + 1):
        if k == 2:
            prev, cur = cur, x.copy()
        elif k > 2:
            j = k - 1
            prev, cur = cur, (2 * (j + lam - 1) * x * cur - (j - 1) * prev) / (j + 2 * lam - 1)
        out[k - 1] = (1 + 2 * k / (q - 1)) * float(np.dot(base, cur * cur))
    return out


def b_coeff_generic(weight: WeightSpec, k: int, q: int, order: int = COEFF_NODES) -> float:
    if k == 0:
        return b_zero(weight)
    return float(b_coeffs_generic(weight, k, q, order)[-1])


def b_zero(weight: WeightSpec) -> float:
    if isinstance(weight, CvM):
        return 1 / 3
    if isinstance(weight, AD):
        return -1.0
    if isinstance(weight, Rothman):
        return 0.5 - weight.t_m * (1 - weight.t_m)
    if isinstance(weight, Dirac):
        return weight.u**2
    if isinstance(weight, DensityCdf):
        u, wu = gauss_legendre(COEFF_NODES).on(0.0, 1.0)
        # int u^2 dW~ = 1 - 2 int u W~(u) du
        return float(1 - 2 * np.sum(u * weight.sym(u) * wu))
    raise TypeError(f"unsupported weight {weight!r}")


# ---------------------------------------------------------------------------
# Closed forms


def _cvm_prefactor(k: int, q: int) -> float:
    log_p = (
        2 * math.log(q - 1)
        + math.log(2 * k + q - 1)
        + 3 * math.lgamma((q - 1) / 2)
        + math.lgamma(1.5 * q)
        - math.log(8 * math.pi)
        - 2 * math.log(q)
        - 3 * math.lgamma(q / 2)
        - math.lgamma((3 * q + 1) / 2)
    )
    return math.exp(log_p)


def b_cvm_hypergeometric(k: int, q: int) -> float:
    """CvM coefficient through the terminating 4F3 representation (q >= 2)."""
    return _cvm_prefactor(k, q) * hyp4f3_unit(k, q)


def b_cvm(k: int, q: int) -> float:
    """CvM kernel coefficient b_{k,q}; b_0 = 1/3.

    For q >= 4 the alternating 4F3 sum loses digits as k grows; when its
    terms are large relative to the result (more than ~5 digits lost) the
    quadrature path is used instead.
    """
    if k == 0:
        return 1 / 3
    if q == 1:
        return 1 / (math.pi**2 * k * k)
    if q == 2:
        return 1 / (2 * (2 * k + 3) * (2 * k - 1))
    if q == 3:
        if k == 1:
            return 35 / (72 * math.pi**2)
        return (3 * k * k + 6 * k + 4) / (2 * math.pi**2 * k * k * (k + 1) * (k + 2) ** 2)
    terms = hyp4f3_terms(k, q)
    total = math.fsum(terms)
    if total > 0 and np.sum(np.abs(terms)) < 1e5 * total:
        return _cvm_prefactor(k, q) * total
    return b_coeff_generic(CvM(), k, q)


def b_ad(k: int, q: int) -> float:
    """Anderson-Darling kernel coefficient; b_0 = -1.

    On the circle the defining integral splits by partial fractions into two
    copies of Cin(2 pi k) = gamma + log(2 pi k) - Ci(2 pi k).
    """
    if k == 0:
        return -1.0
    if q == 1:
        return 2 * _cin(2 * math.pi * k) / (math.pi**2 * k * k)
    if q == 2:
        return 1 / (k * (k + 1))
    return b_coeff_generic(AD(), k, q)


def _cin(x):
    return np.euler_gamma + np.log(x) - special.sici(x)[1]


def b_rothman(k: int, q: int, t: float) -> float:
    t_m = min(t, 1 - t)
    if k == 0:
        return 0.5 - t_m * (1 - t_m)
    if q == 1:
        return 2 * _sin_pi_frac(k * t_m) ** 2 / (k * k * math.pi**2)
    return a_coeff(k, q, proj_quantile(q, t_m))


def _sin_pi_frac(y):
    """|sin(pi y)| after reducing y mod 1, so integer y gives exactly 0."""
    y = np.asarray(y, dtype=float)
    out = np.abs(np.sin(math.pi * (y - np.round(y))))
    return out if out.ndim else float(out)


def b_sequence(weight: WeightSpec, q: int, K: int) -> np.ndarray:
    """b_0, ..., b_K using the most specific route for each weight."""
    b = np.empty(K + 1)
    b[0] = b_zero(weight)
    k = np.arange(1, K + 1, dtype=float)
    if isinstance(weight, CvM) and q <= 3:
        if q == 1:
            b[1:] = 1 / (math.pi**2 * k * k)
        elif q == 2:
            b[1:] = 1 / (2 * (2 * k + 3) * (2 * k - 1))
        else:
            b[1:] = (3 * k * k + 6 * k + 4) / (2 * math.pi**2 * k * k * (k + 1) * (k + 2) ** 2)
            b[1] = 35 / (72 * math.pi**2)
    elif isinstance(weight, AD) and q <= 2:
        b[1:] = 2 * _cin(2 * math.pi * k) / (math.pi**2 * k * k) if q == 1 else 1 / (k * (k + 1))
    elif isinstance(weight, Rothman) and q == 1:
        b[1:] = 2 * _sin_pi_frac(k * weight.t_m) ** 2 / (k * k * math.pi**2)
    else:
        b[1:] = b_coeffs_generic(weight, K, q)
    return b


# ---------------------------------------------------------------------------
# Caching


_MEMORY: dict[tuple[str, int], np.ndarray] = {}
MAGIC = b"PJCF"
VERSION = 1


def coeff_seq(weight: WeightSpec, q: int, K: int = K_MAX) -> CoeffSeq:
    """Cached coefficient sequence; longer cached sequences are truncated on reuse."""
    key = (weight.key, q)
    b = _MEMORY.get(key)
    if b is None or len(b) - 1 < K:
        b = _load_disk(weight.key, q, K)
        if b is None:
            b = b_sequence(weight, q, K)
            _save_disk(weight.key, q, b)
        b.setflags(write=False)
        _MEMORY[key] = b
    return CoeffSeq(q, weight.key, b[: K + 1])


def _cache_dir() -> Path | None:
    path = os.environ.get(CACHE_ENV)
    return Path(path) if path else None


def _cache_file(weight_key: str, q: int) -> Path | None:
    root = _cache_dir()
    if root is None:
        return None
    safe = weight_key.replace(":", "_").replace("/", "_")
    return root / f"coeffs_{safe}_q{q}.bin"


def write_coeffs(path: Path, seq: CoeffSeq) -> None:
    """Binary layout: magic, version, q, K, id length (little-endian uint32s), id bytes, K+1 float64."""
    wid = seq.weight_key.encode()
    header = MAGIC + struct.pack("<IIII", VERSION, seq.q, seq.K, len(wid)) + wid
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(seq.b, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_coeffs(path: Path) -> CoeffSeq:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path} is not a coefficient file")
    version, q, K, n_id = struct.unpack("<IIII", data[4:20])
    if version != VERSION:
        raise ValueError(f"unsupported coefficient file version {version}")
    wid = data[20 : 20 + n_id].decode()
    b = np.frombuffer(data[20 + n_id :], dtype="<f8").astype(float)
    if len(b) != K + 1:
        raise ValueError(f"{path} is truncated")
    return CoeffSeq(q, wid, b)


def _load_disk(weight_key, q, K):
    path = _cache_file(weight_key, q)
    if path is None or not path.exists():
        return None
    try:
        seq = read_coeffs(path)
    except (ValueError, struct.error):
        return None
    if seq.weight_key != weight_key or seq.q != q or seq.K < K:
        return None
    return seq.b.copy()


def _save_disk(weight_key, q, b):
    path = _cache_file(weight_key, q)
    if path is None or weight_key.startswith("cdf:"):
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    write_coeffs(path, CoeffSeq(q, weight_key, b))


# ---------------------------------------------------------------------------
# Mixture


def mixture_weights(coeffs: CoeffSeq) -> ChiSqMixture:
    """Chi-square mixture sum_k w_k chi^2_{d_{k,q}} of the asymptotic null law."""
    b = np.asarray(coeffs.b[1:], dtype=float)
    if np.any(b < 0):
        k = int(np.argmax(b < 0)) + 1
        raise ValueError(f"negative coefficient b_{k} = {b[k - 1]:.3g}; weight is not positive definite")
    q = coeffs.q
    k = np.arange(1, len(b) + 1, dtype=float)
    w = b / 2 if q == 1 else b / (1 + 2 * k / (q - 1))
    return ChiSqMixture(w, eigen_dims(len(b), q))


def kernel_series(coeffs: CoeffSeq, theta: Iterable[float]) -> np.ndarray:
    """sum_k b_k C_k^{(q-1)/2}(cos theta) (Chebyshev T_k on the circle)."""
    from .specfun import gegenbauer_order, gegenbauer_table

    z = np.cos(np.asarray(theta, dtype=float))
    table = gegenbauer_table(coeffs.K, gegenbauer_order(coeffs.q), z)
    return np.tensordot(coeffs.b, table, axes=1)
