import math

import numpy as np
import pytest
from scipy import stats

from projunif.harness import (
    McConfig,
    PowerTable,
    asymptotic_critical_values,
    binomial_interval,
    mc_critical_values,
    mcnemar_one_sided,
    null_rejection_audit,
    null_statistics,
    power_study,
    quantiles_from,
    rejection_rates,
    replicate_samples,
    simulate_statistics,
    write_rows_csv,
    write_rows_json,
)
from projunif.sampling import RngStream, Uniform, VMF, sample_array
from projunif.uniftests import stat_projected
from projunif.kernels import CvM


class TestConfig:
    def test_sorted_levels(self):
        c = McConfig(M=100, n=10, q=2, alpha_levels=(0.01, 0.1, 0.05))
        assert c.alpha_levels == (0.1, 0.05, 0.01)

    def test_invalid(self):
        for kw in ({"M": 99}, {"n": 0}, {"q": 0}, {"alpha_levels": (1.5,)}):
            base = {"M": 100, "n": 10, "q": 2}
            base.update(kw)
            with pytest.raises(ValueError):
                McConfig(**base)


class TestQuantiles:
    def test_extreme_levels(self):
        vals = np.array([3.0, 1.0, 2.0, 5.0])
        q = quantiles_from(vals, [1.0, 0.0])
        assert q[1.0] == 1.0 and q[0.0] == 5.0
        assert rejection_rates(vals, {0.0: q[0.0], 1.0: -math.inf}) == {0.0: 0.0, 1.0: 1.0}

    def test_asymptotic_extremes(self):
        cv = asymptotic_critical_values("cvm", 1, [0.0, 1.0, 0.05])
        assert cv[0.0] == math.inf and cv[1.0] == 0.0
        assert cv[0.05] == pytest.approx(0.3738, abs=1e-3)

    def test_asymptotic_competitors(self):
        assert asymptotic_critical_values("rayleigh", 2, [0.05])[0.05] == pytest.approx(stats.chi2.isf(0.05, 3))
        assert asymptotic_critical_values("bingham", 2, [0.05])[0.05] == pytest.approx(stats.chi2.isf(0.05, 5))
        assert asymptotic_critical_values("ajne", 1, [0.1])[0.1] == asymptotic_critical_values("rt:0.5", 1, [0.1])[0.1]
        with pytest.raises(ValueError):
            asymptotic_critical_values("gine", 2, [0.05])


class TestReplicates:
    def test_streams_per_replicate(self):
        block = replicate_samples(Uniform(), 8, 2, 3, 5, 9)
        for i in range(5, 9):
            assert np.array_equal(block[i - 5], sample_array(Uniform(), 8, 2, RngStream(3, i)))

    def test_common_random_numbers(self):
        out = simulate_statistics(["cvm", "ad"], Uniform(), 15, 2, 120, seed=4)
        X = sample_array(Uniform(), 15, 2, RngStream(4, 77))
        assert out["cvm"][77] == pytest.approx(stat_projected(X, CvM()), abs=1e-12)

    def test_workers_do_not_change_results(self):
        a = simulate_statistics(["cvm", "rt", "rayleigh"], VMF(eta=0.3), 20, 3, 230, seed=6, workers=1)
        b = simulate_statistics(["cvm", "rt", "rayleigh"], VMF(eta=0.3), 20, 3, 230, seed=6, workers=2)
        for k in a:
            assert np.array_equal(a[k], b[k])

    def test_unsupported(self):
        with pytest.raises(ValueError):
            simulate_statistics(["gine"], Uniform(), 10, 1, 100)


class TestCalibration:
    def test_mc_critical_values_order(self):
        cv = mc_critical_values("ad", McConfig(M=2000, n=30, q=2, seed=1))
        assert cv[0.1] < cv[0.05] < cv[0.01]

    def test_audit_near_nominal(self):
        cfg = McConfig(M=4000, n=100, q=1, alpha_levels=(0.1, 0.05), seed=2)
        rates = null_rejection_audit("cvm", cfg, asymptotic_critical_values("cvm", 1, cfg.alpha_levels))
        for a, r in rates.items():
            lo, hi = binomial_interval(a, cfg.M)
            assert lo <= r <= hi

    def test_binomial_interval(self):
        lo, hi = binomial_interval(0.05, 100_000)
        half = 2.5758 * math.sqrt(0.05 * 0.95 / 100_000)
        assert lo == pytest.approx(0.05 - half, abs=2e-5) and hi == pytest.approx(0.05 + half, abs=2e-5)


class TestMcNemar:
    def test_exact_binomial(self):
        a = np.array([1] * 12 + [0] * 3 + [1] * 40 + [0] * 45, bool)
        b = np.array([0] * 12 + [1] * 3 + [1] * 40 + [0] * 45, bool)
        # 12 discordant in favour of a, 3 against: P[Bin(15, 1/2) >= 12]
        ref = sum(math.comb(15, k) for k in range(12, 16)) / 2**15
        assert mcnemar_one_sided(a, b) == pytest.approx(ref)

    def test_no_discordance(self):
        a = np.array([True, False, True])
        assert mcnemar_one_sided(a, a) == 1.0


@pytest.fixture(scope="module")
def table():
    cfg = McConfig(M=600, n=50, q=2, alpha_levels=(0.05,), seed=3)
    return power_study([("vmf", 0.0), ("vmf", 0.25), ("vmf", 0.5), ("vmf", 1.0)], ["cvm", "rayleigh"], cfg, null_M=2000)


class TestPower:

    def test_monotone_in_kappa(self, table):
        for t in ("cvm", "rayleigh"):
            rates = [table.rate("vmf", k, t) for k in (0.0, 0.25, 0.5, 1.0)]
            assert rates[0] < 0.1
            assert all(b >= a - 3 * 0.02 for a, b in zip(rates, rates[1:]))
            assert rates[-1] > 0.9

    def test_rows(self, table):
        assert len(table.rows) == 8
        row = table.rows[0]
        assert set(row) == {"test", "dgp", "q", "n", "kappa", "alpha", "rate", "stderr", "M", "seed"}
        assert row["stderr"] == pytest.approx(math.sqrt(row["rate"] * (1 - row["rate"]) / 600))

    def test_mcnemar_pairs_decisions(self, table):
        p = table.mcnemar("vmf", 0.5, "rayleigh", "cvm")
        assert 0 <= p <= 1

    def test_given_critical_values(self):
        cfg = McConfig(M=200, n=20, q=1, alpha_levels=(0.05,), seed=9)
        t = power_study([("vmf", 0.5)], ["cvm"], cfg, critical_values={"cvm": -1.0})
        assert t.rate("vmf", 0.5, "cvm") == 1.0


class TestOutput:
    def test_csv_round_trip(self, tmp_path):
        rows = [{"test": "cvm", "rate": 0.1 + 0.2, "M": 10}, {"test": "ad", "rate": 1 / 3, "M": 10}]
        p = tmp_path / "r.csv"
        write_rows_csv(p, rows)
        import csv

        back = list(csv.DictReader(open(p)))
        assert float(back[0]["rate"]) == 0.1 + 0.2
        assert float(back[1]["rate"]) == 1 / 3

    def test_json_round_trip(self, tmp_path):
        import json

        rows = [{"rate": 1 / 7, "kappa": 0.5}]
        p = tmp_path / "r.json"
        write_rows_json(p, rows)
        assert json.loads(p.read_text())[0]["rate"] == 1 / 7
