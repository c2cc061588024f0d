#!/usr/bin/env python3
"""Size and power study for the location-model test (homoscedastic designs).

Four blocks at the median: size under three null models (m1 a=0, m2a c=2,
m3 b=0), then power sweeps over the strength parameter in models m1, m2b
and m3.  Defaults are desk scale -- 50 Monte-Carlo runs per cell and a
single sample size -- so a full sweep stays under half an hour on one
core; raise --runs / add --n values to approach the published layout.

Example:
    python3 scripts/location_study.py --runs 50 --n 100 --workers 4
"""

import argparse
import csv
import sys
import time

from qlstest.simulation import model_spec, run_study

NULL_CELLS = [
    ("m1 a=0", model_spec("m1", a=0.0)),
    ("m2a c=2", model_spec("m2a", c=2.0)),
    ("m3 b=0", model_spec("m3", b=0.0)),
]
POWER_SWEEPS = [
    ("m1", "a", (0.0, 1.0, 2.5, 5.0, 10.0)),
    ("m2b", "c", (0.2, 0.4, 0.6, 0.8, 1.0)),
    ("m3", "b", (0.0, 1.0, 2.0, 3.0, 5.0)),
]


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
    ap.add_argument("--n", type=int, nargs="+", default=[100],
                    help="sample sizes (default: 100)")
    ap.add_argument("--runs", type=int, default=50,
                    help="Monte-Carlo runs per cell (default: 50)")
    ap.add_argument("--B", type=int, default=200,
                    help="bootstrap replications (default: 200)")
    ap.add_argument("--tau", type=float, default=0.5)
    ap.add_argument("--level", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=20260301)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", type=str, default=None,
                    help="also append per-cell rows to this CSV file")
    args = ap.parse_args(argv)

    t0 = time.time()
    all_rows = []

    def cell(model, n, cell_idx):
        res = run_study(model, n, args.runs, args.B, args.tau, args.level,
                        "location", args.seed + cell_idx, args.workers)
        all_rows.append(res.to_row())
        return res

    idx = 0
    null_rates = {}
    for n in args.n:
        for label, model in NULL_CELLS:
            null_rates[(n, label)] = cell(model, n, idx)
            idx += 1
    labels = [label for label, _ in NULL_CELLS]
    rows = []
    for n in args.n:
        rows.append((f"KS  n={n}",
                     [null_rates[(n, c)].reject_rate_ks for c in labels]))
        rows.append((f"CvM n={n}",
                     [null_rates[(n, c)].reject_rate_cvm for c in labels]))
    print_block(f"size of the location test (level {args.level:g}, "
                f"runs {args.runs}, B {args.B})", labels, rows)

    for model_id, pname, values in POWER_SWEEPS:
        sweep = {}
        for n in args.n:
            for v in values:
                sweep[(n, v)] = cell(model_spec(model_id, **{pname: v}),
                                     n, idx)
                idx += 1
        cols = [f"{pname}={v:g}" for v in values]
        rows = []
        for n in args.n:
            rows.append((f"KS  n={n}",
                         [sweep[(n, v)].reject_rate_ks for v in values]))
            rows.append((f"CvM n={n}",
                         [sweep[(n, v)].reject_rate_cvm for v in values]))
        print_block(f"power against model {model_id} alternatives",
                    cols, rows)

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
