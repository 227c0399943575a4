"""Asymptotic and exact-n critical values of the CvM, AD and Rt tests.

    python scripts/critical_values.py --out cv.csv                 # n = infinity only
    python scripts/critical_values.py --n 50 100 200 --M 100000    # plus Monte Carlo columns
"""

import argparse
import time

from projunif.harness import McConfig, asymptotic_critical_values, mc_critical_values, write_rows_csv

ALPHAS = (0.10, 0.05, 0.01)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--tests", nargs="+", default=["cvm", "ad", "rt"])
    p.add_argument("--q", nargs="+", type=int, default=[1, 2, 3, 10])
    p.add_argument("--n", nargs="*", type=int, default=[])
    p.add_argument("--M", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args()

    rows = []
    for test in args.tests:
        for q in args.q:
            for n in args.n:
                t0 = time.perf_counter()
                cfg = McConfig(M=args.M, n=n, q=q, alpha_levels=ALPHAS, seed=args.seed, workers=args.workers)
                cv = mc_critical_values(test, cfg)
                rows += [dict(test=test, q=q, n=n, alpha=a, critical_value=cv[a], M=args.M, seed=args.seed) for a in ALPHAS]
                print(f"{test:>4} q={q:<3} n={n:<5}", *(f"{cv[a]:.4f}" for a in ALPHAS), f"({time.perf_counter() - t0:.0f} s)")
            cv = asymptotic_critical_values(test, q, ALPHAS)
            rows += [dict(test=test, q=q, n="inf", alpha=a, critical_value=cv[a], M="", seed="") for a in ALPHAS]
            print(f"{test:>4} q={q:<3} n=inf  ", *(f"{cv[a]:.4f}" for a in ALPHAS))
    if args.out:
        write_rows_csv(args.out, rows)


if __name__ == "__main__":
    main()
