#!/usr/bin/env python3
"""Size and power study for the location-scale-model test.

Heteroscedastic designs with scale (2+x)/10 at the median: size under
m1h, m2ah (c=2) and m3h (b=0), a power sweep over b in m3h, and the
m2bh c=1 cell (a known hard case for median-absolute-deviation scaled
residuals -- expect low power there).  Desk-scale defaults; each run
costs roughly twice a location-test run because of the scale fit.

Example:
    python3 scripts/location_scale_study.py --runs 50 --n 100
"""

import argparse
import csv
import sys
import time

from qlstest.simulation import model_spec, run_study

NULL_CELLS = [
    ("m1h", model_spec("m1h", a=0.0)),
    ("m2ah c=2", model_spec("m2ah", c=2.0)),
    ("m3h b=0", model_spec("m3h", b=0.0)),
]
B_SWEEP = (0.0, 1.0, 2.0, 3.0, 5.0)


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
    ap.add_argument("--tau", type=float, default=0.5)
    ap.add_argument("--level", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=20260302)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", type=str, default=None)
    args = ap.parse_args(argv)

    t0 = time.time()
    all_rows = []

    def cell(model, n, cell_idx):
        res = run_study(model, n, args.runs, args.B, args.tau, args.level,
                        "location_scale", args.seed + cell_idx, args.workers)
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
    print_block(f"size of the location-scale test (level {args.level:g}, "
                f"runs {args.runs}, B {args.B})", labels, rows)

    sweep = {}
    for n in args.n:
        for b in B_SWEEP:
            sweep[(n, b)] = cell(model_spec("m3h", b=b), n, idx)
            idx += 1
    rows = []
    for n in args.n:
        rows.append((f"KS  n={n}",
                     [sweep[(n, b)].reject_rate_ks for b in B_SWEEP]))
        rows.append((f"CvM n={n}",
                     [sweep[(n, b)].reject_rate_cvm for b in B_SWEEP]))
    print_block("power against m3h alternatives",
                [f"b={b:g}" for b in B_SWEEP], rows)

    hard = {}
    for n in args.n:
        hard[n] = cell(model_spec("m2bh", c=1.0), n, idx)
        idx += 1
    rows = []
    for n in args.n:
        rows.append((f"KS  n={n}", [hard[n].reject_rate_ks]))
        rows.append((f"CvM n={n}", [hard[n].reject_rate_cvm]))
    print_block("m2bh c=1 (low power expected)", ["c=1"], rows)

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
