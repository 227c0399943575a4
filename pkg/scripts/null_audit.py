"""Null rejection rates of the CvM, AD and Rt tests with asymptotic critical values.

A rate is flagged '*' when it lies inside the 99% binomial interval about alpha.

    python scripts/null_audit.py --n 50 100 200 --M 100000 --out audit.csv
"""

import argparse

import numpy as np

from projunif.harness import asymptotic_critical_values, binomial_interval, null_statistics, write_rows_csv

ALPHAS = (0.10, 0.05, 0.01)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--tests", nargs="+", default=["cvm", "ad", "rt"])
    p.add_argument("--q", nargs="+", type=int, default=[1, 2, 3, 10])
    p.add_argument("--n", nargs="+", type=int, default=[50, 100, 200])
    p.add_argument("--M", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args()

    cvs = {(t, q): asymptotic_critical_values(t, q, ALPHAS) for t in args.tests for q in args.q}
    rows = []
    for q in args.q:
        for n in args.n:
            null = null_statistics(args.tests, n, q, args.M, args.seed, args.workers)
            for t in args.tests:
                cells = []
                for a in ALPHAS:
                    rate = float(np.mean(null[t] > cvs[t, q][a]))
                    lo, hi = binomial_interval(a, args.M)
                    rows.append(dict(test=t, q=q, n=n, alpha=a, rate=rate, inside=lo <= rate <= hi, M=args.M, seed=args.seed))
                    cells.append(f"{rate:.4f}{'*' if lo <= rate <= hi else ' '}")
                print(f"{t:>4} q={q:<3} n={n:<5}", *cells)
    if args.out:
        write_rows_csv(args.out, rows)


if __name__ == "__main__":
    main()
