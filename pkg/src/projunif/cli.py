"""Command-line front end.

    projunif test data.csv --format orbital --tests cvm,ad,rt
    projunif cv --test cvm --q 1 --asymptotic --alpha 0.05
    projunif cv --test ad --q 10 --n 50 --M 100000 --alpha 0.1
    projunif power study.json --out power.csv
    projunif sample --dgp vmf:eta=0.5 --n 100 --q 2 --seed 1 --out sample.csv

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .chi2mix import ImhofConvergenceError, TailQuery
from .coeffs import CACHE_ENV, K_MAX
from .harness import McConfig, asymptotic_critical_values, mc_critical_values, power_study, write_rows_csv, write_rows_json
from .sampling import RngStream, parse_alternative, sample_array
from .uniftests import UnitSample, UnsupportedDimension, run_test

FORMATS = ("cartesian", "circular", "orbital", "latlon")
EXIT_INPUT, EXIT_NUMERIC = 2, 3


class InputError(ValueError):
    pass


def _row_to_point(values: list[float], fmt: str) -> list[float]:
    if fmt == "cartesian":
        return values
    if fmt == "circular":
        (a,) = values
        return [math.cos(a), math.sin(a)]
    if fmt == "orbital":
        inc, node = values
        return [math.sin(inc) * math.sin(node), -math.sin(inc) * math.cos(node), math.cos(inc)]
    if fmt == "latlon":
        lat, lon = (math.radians(v) for v in values)
        return [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
    raise InputError(f"unknown format {fmt!r}")


def ingest(path, fmt: str = "cartesian", header: bool = False) -> UnitSample:
    """Read a CSV file into a UnitSample.

    Rows that cannot be parsed, or have the wrong number of columns, abort the
    load with their line numbers. Zero or non-finite cartesian rows are dropped
    and listed in ``meta['dropped']``.
    """
    if fmt not in FORMATS:
        raise InputError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
    width = {"circular": 1, "orbital": 2, "latlon": 2}.get(fmt)
    points, bad, dropped = [], [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                bad.append(lineno)
                continue
            if width is None:
                width = len(values)
            if len(values) != width or (fmt == "cartesian" and width < 2):
                bad.append(lineno)
                continue
            p = _row_to_point(values, fmt)
            norm = math.sqrt(sum(v * v for v in p))
            if not math.isfinite(norm) or norm == 0:
                dropped.append(lineno)
                continue
            points.append(p)
    if bad:
        raise InputError(f"malformed rows at lines {', '.join(map(str, bad))}")
    if not points:
        raise InputError("no data rows found")
    meta = {"path": str(path), "format": fmt, "rows": len(points), "dropped": dropped}
    return UnitSample(np.array(points), meta=meta)


# ---------------------------------------------------------------------------
# Commands


def _dump(obj, out):
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_test(args) -> int:
    sample = ingest(args.file, args.format, args.header)
    if sample.meta["dropped"]:
        print(f"dropped zero-norm rows at lines {sample.meta['dropped']}", file=sys.stderr)
    if args.pvalue == "asymp" and sample.n < 2:
        raise InputError("sample too small for asymptotic calibration")
    query = TailQuery(K_max=args.K_max, delta=args.delta)
    results, skipped = {}, {}
    for tid in args.tests.split(","):
        tid = tid.strip()
        try:
            out = run_test(sample, tid, pvalue=args.pvalue, M=args.M, seed=args.seed, query=query)
        except UnsupportedDimension as exc:
            skipped[tid] = str(exc)
            continue
        except ValueError as exc:
            if "asymptotic" in str(exc) or "not available" in str(exc):
                skipped[tid] = str(exc)
                continue
            raise
        results[tid] = {"statistic": out.statistic, "p_value": out.p_value, "method": out.method, "params": out.params}
    report = {"n": sample.n, "q": sample.q, "dropped_rows": sample.meta["dropped"], "results": results}
    if skipped:
        report["skipped"] = skipped
    _dump(report, args.out)
    return 0


def cmd_cv(args) -> int:
    alphas = args.alpha
    if args.asymptotic:
        cv = asymptotic_critical_values(args.test, args.q, alphas, TailQuery(K_max=args.K_max))
        n_label, M = "inf", None
    else:
        if args.n is None:
            raise InputError("give --n or --asymptotic")
        cfg = McConfig(M=args.M, n=args.n, q=args.q, alpha_levels=tuple(alphas), seed=args.seed, workers=args.workers)
        cv = mc_critical_values(args.test, cfg)
        n_label, M = args.n, args.M
    rows = [{"test": args.test, "q": args.q, "n": n_label, "alpha": a, "critical_value": v, "M": M, "seed": args.seed}
            for a, v in sorted(cv.items(), reverse=True)]
    for r in rows:
        print(f"{r['test']:>8} q={r['q']:<3} n={r['n']:<5} alpha={r['alpha']:.2f}  {r['critical_value']:.4f}")
    _write(rows, args.out)
    return 0


def _write(rows, out):
    if not out:
        return
    if str(out).endswith(".json"):
        write_rows_json(out, rows)
    else:
        write_rows_csv(out, rows)


def cmd_power(args) -> int:
    try:
        conf = json.loads(Path(args.config).read_text())
        cfg = McConfig(M=int(conf["M"]), n=int(conf["n"]), q=int(conf["q"]),
                       alpha_levels=(float(conf.get("alpha", 0.05)),), seed=int(conf.get("seed", args.seed)),
                       workers=int(conf.get("workers", 1)))
        dgps = [(str(d), float(k)) for d, k in conf["dgps"]]
        tests = list(conf["tests"])
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"bad power configuration: {exc}") from exc
    table = power_study(dgps, tests, cfg, null_M=conf.get("null_M"))
    for r in table.rows:
        print(f"{r['dgp']:>5} kappa={r['kappa']:.2f} {r['test']:>9}  {r['rate']:.4f} ({r['stderr']:.4f})")
    _write(table.rows, args.out)
    return 0


def cmd_sample(args) -> int:
    spec = parse_alternative(args.dgp)
    X = sample_array(spec, args.n, args.q, RngStream(args.seed, 0).generator())
    lines = [",".join(repr(float(v)) for v in row) for row in X]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="projunif", description="Projected-ecdf uniformity tests on the sphere.",
                                epilog=f"Coefficient files are cached in ${CACHE_ENV} when it is set.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run uniformity tests on a data file")
    t.add_argument("file")
    t.add_argument("--format", choices=FORMATS, default="cartesian")
    t.add_argument("--header", action="store_true", help="skip the first row")
    t.add_argument("--tests", default="cvm,ad,rt")
    t.add_argument("--pvalue", choices=("asymp", "mc", "none"), default="asymp")
    t.add_argument("--M", type=int, default=10_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--K-max", dest="K_max", type=int, default=K_MAX)
    t.add_argument("--delta", type=float, default=0.0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_test)

    c = sub.add_parser("cv", help="critical values (exact-n by Monte Carlo, or asymptotic)")
    c.add_argument("--test", required=True)
    c.add_argument("--q", type=int, required=True)
    c.add_argument("--n", type=int)
    c.add_argument("--asymptotic", action="store_true")
    c.add_argument("--alpha", type=float, nargs="+", default=[0.10, 0.05, 0.01])
    c.add_argument("--M", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--K-max", dest="K_max", type=int, default=K_MAX)
    c.add_argument("--out")
    c.set_defaults(func=cmd_cv)

    w = sub.add_parser("power", help="power study from a JSON configuration")
    w.add_argument("config")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out")
    w.set_defaults(func=cmd_power)

    s = sub.add_parser("sample", help="draw a sample from a named law")
    s.add_argument("--dgp", default="uniform", help="e.g. uniform, vmf:eta=1, wat:eta=2, sc:eta=-1,tau=0.5, local:w=ad,kappa=0.5")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ImhofConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
