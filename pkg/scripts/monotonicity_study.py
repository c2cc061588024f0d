#!/usr/bin/env python3
"""Size and power study for the quantile-monotonicity test.

Model m4 (median 1 + x - beta*exp(-50(x-0.5)^2), parallel quantile
curves): beta=0 is strictly increasing, beta=0.15 has a flat spot, and
larger beta a decreasing bump, so rejection rates should climb along the
beta sweep.  Model m5 (median x/2, scale 2(0.1-(x-0.5)^2)): the median
is strictly increasing but the outer quantile curves are not, so the
test should hold its level at tau=0.5 and reject at tau=0.25 / 0.75.

Example:
    python3 scripts/monotonicity_study.py --runs 50 --n 100
"""

import argparse
import csv
import sys
import time

from qlstest.simulation import model_spec, run_study

BETA_SWEEP = (0.0, 0.15, 0.25, 0.45)
M4_TAUS = (0.25, 0.5)
M5_TAUS = (0.25, 0.5, 0.75)


def print_block(title, col_labels, rows):
    width = max(9, *(len(c) + 2 for c in col_labels))
    print()
    print(title)
    print("  " + " " * 12 + "".join(f"{c:>{width}}" for c in col_labels))
    for label, values in rows:
        cells = "".join(f"{v:>{width}.3f}" for v in values)
        print(f"  {label:<12}{cells}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[100])
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--B", type=int, default=200)
    ap.add_argument("--level", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=20260303)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", type=str, default=None)
    args = ap.parse_args(argv)

    t0 = time.time()
    all_rows = []

    def cell(model, n, tau, cell_idx):
        res = run_study(model, n, args.runs, args.B, tau, args.level,
                        "monotone", args.seed + cell_idx, args.workers)
        all_rows.append(res.to_row())
        return res

    idx = 0
    m4 = {}
    for tau in M4_TAUS:
        for n in args.n:
            for beta in BETA_SWEEP:
                m4[(tau, n, beta)] = cell(model_spec("m4", beta=beta),
                                          n, tau, idx)
                idx += 1
    for tau in M4_TAUS:
        rows = [(f"beta={beta:g}",
                 [m4[(tau, n, beta)].reject_rate_ks for n in args.n])
                for beta in BETA_SWEEP]
        print_block(f"m4 monotonicity test, tau={tau:g} "
                    f"(level {args.level:g}, runs {args.runs}, B {args.B})",
                    [f"n={n}" for n in args.n], rows)

    m5 = {}
    for tau in M5_TAUS:
        for n in args.n:
            m5[(tau, n)] = cell(model_spec("m5"), n, tau, idx)
            idx += 1
    rows = [(f"tau={tau:g}", [m5[(tau, n)].reject_rate_ks for n in args.n])
            for tau in M5_TAUS]
    print_block("m5 monotonicity test (median increasing, outer curves not)",
                [f"n={n}" for n in args.n], rows)

    failures = sum(r["failures"] for r in all_rows)
    print(f"\n{idx} cells, {failures} failed runs, "
          f"{time.time() - t0:.0f}s elapsed")

    if args.csv:
        with open(args.csv, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(all_rows[0]))
            if fh.tell() == 0:
                writer.writeheader()
            writer.writerows(all_rows)
        print(f"rows appended to {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
