"""Monte Carlo engines: exact-n critical values, null rejection audits, power studies.

Replicate i always draws from RngStream(seed, i), so results do not depend on
how replicates are split into batches or spread over worker processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .chi2mix import TailQuery, mixture_quantile
from .kernels import Rothman
from .sampling import Alternative, RngStream, Uniform, dgp_preset, sample_array
from .uniftests import PairContext, get_test, weight_of

BATCH = 10  # small batches keep the pair arrays in cache


@dataclass(frozen=True)
class McConfig:
    M: int
    n: int
    q: int
    alpha_levels: tuple = (0.10, 0.05, 0.01)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.M < 100:
            raise ValueError("M must be at least 100")
        if self.n < 1 or self.q < 1:
            raise ValueError("n and q must be positive")
        alphas = tuple(sorted((float(a) for a in self.alpha_levels), reverse=True))
        if any(not 0 <= a <= 1 for a in alphas):
            raise ValueError("alpha levels must lie in [0, 1]")
        object.__setattr__(self, "alpha_levels", alphas)


def replicate_samples(spec: Alternative, n: int, q: int, seed: int, start: int, stop: int) -> np.ndarray:
    out = np.empty((stop - start, n, q + 1))
    for i in range(start, stop):
        out[i - start] = sample_array(spec, n, q, RngStream(seed, i).generator())
    return out


def _chunk(args):
    test_ids, spec, n, q, seed, start, stop = args
    tests = [get_test(t, seed) for t in test_ids]
    res = {t: np.empty(stop - start) for t in test_ids}
    for lo in range(start, stop, BATCH):
        hi = min(lo + BATCH, stop)
        ctx = PairContext(replicate_samples(spec, n, q, seed, lo, hi))
        for tid, test in zip(test_ids, tests):
            res[tid][lo - start:hi - start] = test(ctx)
    return res


def simulate_statistics(test_ids: Sequence[str], spec: Alternative, n: int, q: int, M: int,
                        seed: int = 0, workers: int = 1) -> dict[str, np.ndarray]:
    """Statistics of every test on the same M replicate samples (common random numbers)."""
    test_ids = list(test_ids)
    for t in test_ids:
        if not get_test(t, seed).supports(q):
            raise ValueError(f"{t} is not available for q={q}")
    step = max(BATCH, math.ceil(M / (4 * max(workers, 1))))
    jobs = [(test_ids, spec, n, q, seed, s, min(s + step, M)) for s in range(0, M, step)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, jobs))
    else:
        parts = [_chunk(j) for j in jobs]
    return {t: np.concatenate([p[t] for p in parts]) for t in test_ids}


def null_statistics(test_ids, n, q, M, seed=0, workers=1):
    return simulate_statistics(test_ids, Uniform(), n, q, M, seed, workers)


def quantiles_from(values: np.ndarray, alphas: Iterable[float]) -> dict[float, float]:
    """Upper-alpha empirical quantiles (order statistics, linear interpolation)."""
    return {float(a): float(np.quantile(values, 1 - a, method="linear")) for a in alphas}


def mc_critical_values(test_id: str, config: McConfig) -> dict[float, float]:
    null = null_statistics([test_id], config.n, config.q, config.M, config.seed, config.workers)[test_id]
    return quantiles_from(null, config.alpha_levels)


def asymptotic_critical_values(test_id: str, q: int, alphas: Iterable[float],
                               query: TailQuery = TailQuery()) -> dict[float, float]:
    weight = weight_of(test_id)
    if weight is None and test_id == "ajne":
        weight = Rothman(0.5)
    out = {}
    for a in alphas:
        a = float(a)
        if a <= 0:
            out[a] = math.inf
        elif test_id == "rayleigh":
            out[a] = float(stats.chi2.isf(a, q + 1))
        elif test_id == "bingham":
            out[a] = float(stats.chi2.isf(a, (q + 1) * (q + 2) // 2 - 1))
        elif weight is not None:
            out[a] = mixture_quantile(weight, q, a, query) if a < 1 else 0.0
        else:
            raise ValueError(f"no asymptotic critical values for {test_id!r}")
    return out


def rejection_rates(values: np.ndarray, critical_values: dict[float, float]) -> dict[float, float]:
    return {a: (0.0 if a == 0 else float(np.mean(values > c))) for a, c in critical_values.items()}


def null_rejection_audit(test_id: str, config: McConfig, critical_values: dict[float, float]) -> dict[float, float]:
    """Share of null replicates whose statistic exceeds each critical value."""
    null = null_statistics([test_id], config.n, config.q, config.M, config.seed, config.workers)[test_id]
    return rejection_rates(null, critical_values)


def binomial_interval(p: float, M: int, level: float = 0.99) -> tuple[float, float]:
    """Central binomial interval for a proportion with true value p over M trials."""
    lo, hi = stats.binom.interval(level, M, p)
    return lo / M, hi / M


def mcnemar_one_sided(dec_a: np.ndarray, dec_b: np.ndarray) -> float:
    """Exact McNemar p-value for 'test a rejects more often than test b' on paired decisions."""
    a, b = np.asarray(dec_a, bool), np.asarray(dec_b, bool)
    only_a, only_b = int(np.sum(a & ~b)), int(np.sum(~a & b))
    if only_a + only_b == 0:
        return 1.0
    return float(stats.binomtest(only_a, only_a + only_b, 0.5, alternative="greater").pvalue)


@dataclass
class PowerTable:
    q: int
    n: int
    M: int
    seed: int
    alpha: float
    rows: list[dict] = field(default_factory=list)
    decisions: dict[tuple, np.ndarray] = field(default_factory=dict, repr=False)

    def rate(self, dgp: str, kappa: float, test: str) -> float:
        return float(np.mean(self.decisions[(dgp, float(kappa), test)]))

    def stderr(self, dgp: str, kappa: float, test: str) -> float:
        p = self.rate(dgp, kappa, test)
        return math.sqrt(p * (1 - p) / self.M)

    def mcnemar(self, dgp: str, kappa: float, better: str, worse: str) -> float:
        return mcnemar_one_sided(self.decisions[(dgp, float(kappa), better)],
                                 self.decisions[(dgp, float(kappa), worse)])

    def to_csv(self, path) -> None:
        write_rows_csv(path, self.rows)

    def to_json(self, path) -> None:
        write_rows_json(path, self.rows)


COLUMNS = ("test", "dgp", "q", "n", "kappa", "alpha", "rate", "stderr", "M", "seed")


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else v


def write_rows_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else list(COLUMNS))
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def write_rows_json(path, rows: list[dict]) -> None:
    Path(path).write_text(json.dumps(rows, indent=1))


def power_study(dgps: Sequence[tuple[str, float]], tests: Sequence[str], config: McConfig,
                critical_values: dict[str, float] | None = None, null_M: int | None = None) -> PowerTable:
    """Rejection rates at alpha = 0.05 (or the first level of ``config``) for each (dgp, kappa) and test.

    Critical values default to exact-n Monte Carlo quantiles from ``null_M``
    null replicates drawn from a seed distinct from the power replicates.
    """
    alpha = 0.05 if 0.05 in config.alpha_levels else config.alpha_levels[0]
    tests = list(tests)
    if critical_values is None:
        null = null_statistics(tests, config.n, config.q, null_M or config.M, config.seed + 1, config.workers)
        critical_values = {t: quantiles_from(null[t], [alpha])[alpha] for t in tests}
    table = PowerTable(config.q, config.n, config.M, config.seed, alpha)
    for name, kappa in dgps:
        spec = dgp_preset(name, kappa)
        values = simulate_statistics(tests, spec, config.n, config.q, config.M, config.seed, config.workers)
        for t in tests:
            dec = values[t] > critical_values[t]
            table.decisions[(name, float(kappa), t)] = dec
            p = float(np.mean(dec))
            table.rows.append({
                "test": t, "dgp": name, "q": config.q, "n": config.n, "kappa": float(kappa),
                "alpha": alpha, "rate": p, "stderr": math.sqrt(p * (1 - p) / config.M),
                "M": config.M, "seed": config.seed,
            })
    return table
