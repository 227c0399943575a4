"""Empirical powers at alpha = 0.05 with exact-n Monte Carlo critical values.

Tests that are not significantly less powerful than the best test of a row
(exact one-sided McNemar test at 5%) are marked '*'.

    python scripts/power_study.py --q 1 --n 100 --kappa 0.5 --M 10000 --out power.csv
"""

import argparse

from projunif.harness import McConfig, power_study, write_rows_csv

TESTS = ["rayleigh", "bingham", "ajne", "gine", "ccf09", "bakshaev", "cvm", "ad", "rt"]
DGPS = ["cvm", "ad", "rt", "vmf", "sc", "wat"]


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--dgps", nargs="+", default=DGPS)
    p.add_argument("--tests", nargs="+", default=TESTS)
    p.add_argument("--M", type=int, default=10_000)
    p.add_argument("--null-M", dest="null_M", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args()

    tests = [t for t in args.tests if not (t == "gine" and args.q == 1)]
    cfg = McConfig(M=args.M, n=args.n, q=args.q, alpha_levels=(0.05,), seed=args.seed, workers=args.workers)
    table = power_study([(d, args.kappa) for d in args.dgps], tests, cfg, null_M=args.null_M)
    print(f"{'dgp':>5}", *(f"{t:>9}" for t in tests))
    for d in args.dgps:
        rates = {t: table.rate(d, args.kappa, t) for t in tests}
        best = max(rates, key=rates.get)
        marks = {t: t == best or table.mcnemar(d, args.kappa, best, t) >= 0.05 for t in tests}
        print(f"{d:>5}", *(f"{rates[t]:8.4f}{'*' if marks[t] else ' '}" for t in tests))
    if args.out:
        write_rows_csv(args.out, table.rows)


if __name__ == "__main__":
    main()
