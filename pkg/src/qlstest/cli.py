"""Command line front end: CSV in, tests/curves/study tables out.

Three subcommands share the estimation pipeline::

    qlstest test      run a specification test on a CSV file, emit JSON
    qlstest estimate  export fitted curves, residuals and the process field
    qlstest simulate  Monte-Carlo rejection rates for a catalog model

Exit codes: 0 no rejection (or successful export), 3 rejection, 1 usage
errors, 2 data errors.  Input CSV must have the header ``x,y`` with x in
[0, 1].  All randomized commands take --seed and produce byte-identical
output for a fixed seed, independent of --workers.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .bandwidths import pipeline_bandwidths
from .bootstrap import BootstrapConfig, bootstrap_test
from .cond_cdf import Sample
from .errors import QlsError
from .kernels import kernel_from_name
from .quantile_scale import estimate_quantile_curve, estimate_scale_curve
from .rearrangement import constrained_quantile_curve
from .residual_process import compute_residuals, independence_process
from .simulation import MODEL_IDS, model_spec, run_study

__all__ = ["CliConfig", "main", "cmd_test", "cmd_estimate", "cmd_simulate"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REJECT = 3

MODEL_KINDS = ("location", "location_scale", "monotone")


class _DataError(Exception):
    """Problem with the input data (not with the invocation)."""


@dataclass(frozen=True)
class CliConfig:
    command: str
    model_kind: str = "location"
    tau: float = 0.5
    level: float = 0.05
    B: int = 200
    seed: int = 0
    workers: int = 1
    input: Optional[str] = None
    output: Optional[str] = None
    grid_m: int = 201
    kernel_K: str = "gaussian"
    # bandwidth overrides (None: pipeline defaults)
    h: Optional[float] = None
    d: Optional[float] = None
    b: Optional[float] = None
    alpha: Optional[float] = None
    t: Optional[float] = None
    # simulate-only
    model: Optional[str] = None
    params: Tuple[Tuple[str, float], ...] = ()
    n: int = 100
    runs: int = 200


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with code 1, not 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qlstest",
                     description="Quantile location-scale estimation and "
                                 "bootstrap specification tests")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_B=True):
        p.add_argument("--tau", type=float, default=0.5)
        p.add_argument("--level", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--model-kind", choices=MODEL_KINDS,
                       default="location", dest="model_kind")
        if with_B:
            p.add_argument("--B", type=int, default=200)

    def bandwidths(p):
        p.add_argument("--h", type=float, default=None,
                       help="covariate bandwidth override; also ties the "
                            "trim margin to h unless --t is given")
        p.add_argument("--d", type=float, default=None)
        p.add_argument("--b", type=float, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--t", type=float, default=None,
                       help="trim margin override")
        p.add_argument("--kernel-K", dest="kernel_K", default="gaussian",
                       choices=("gaussian", "epanechnikov", "quartic4"))

    p_test = sub.add_parser("test", help="run a specification test on a CSV")
    p_test.add_argument("--input", required=True)
    p_test.add_argument("--output", default=None,
                        help="write the JSON report here instead of stdout")
    common(p_test)
    bandwidths(p_test)

    p_est = sub.add_parser("estimate", help="export curves/residuals/field")
    p_est.add_argument("--input", required=True)
    p_est.add_argument("--output", required=True,
                       help="output directory for the CSV files")
    p_est.add_argument("--grid-m", dest="grid_m", type=int, default=201)
    common(p_est, with_B=False)
    bandwidths(p_est)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo rejection rates")
    p_sim.add_argument("--model", required=True, choices=sorted(MODEL_IDS))
    p_sim.add_argument("--a", type=float, default=None)
    p_sim.add_argument("--b", type=float, default=None)
    p_sim.add_argument("--c", type=float, default=None)
    p_sim.add_argument("--beta", type=float, default=None)
    p_sim.add_argument("--n", type=int, default=100)
    p_sim.add_argument("--runs", type=int, default=200)
    p_sim.add_argument("--output", default=None,
                       help="write the CSV row here instead of stdout")
    common(p_sim)
    return parser


def _config_from_args(ns: argparse.Namespace, parser: _Parser) -> CliConfig:
    if not 0.0 < ns.tau < 1.0:
        parser.error("--tau must be in (0, 1)")
    if not 0.0 < ns.level < 1.0:
        parser.error("--level must be in (0, 1)")
    if getattr(ns, "B", 1) < 1:
        parser.error("--B must be >= 1")
    if ns.workers < 1:
        parser.error("--workers must be >= 1")
    if getattr(ns, "runs", 1) < 1:
        parser.error("--runs must be >= 1")
    if getattr(ns, "n", 2) < 2:
        parser.error("--n must be >= 2")
    if getattr(ns, "grid_m", 2) < 2:
        parser.error("--grid-m must be >= 2")
    params = tuple(sorted((k, float(v)) for k in ("a", "b", "c", "beta")
                          if (v := getattr(ns, k, None)) is not None))
    fields = {f: getattr(ns, f) for f in
              ("command", "model_kind", "tau", "level", "seed", "workers")}
    for opt in ("B", "input", "output", "grid_m", "kernel_K",
                "h", "d", "b", "alpha", "t", "model", "n", "runs"):
        if hasattr(ns, opt):
            fields[opt] = getattr(ns, opt)
    if ns.command == "simulate":
        fields.pop("b", None)  # simulate's --b is the model parameter
        fields["params"] = params
    return CliConfig(**fields)


def _load_sample(path: str) -> Sample:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise _DataError(f"cannot read {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
        raise _DataError(f"{path}: first line must be the header 'x,y'")
    xs, ys = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise _DataError(f"{path}:{lineno}: expected two columns")
        try:
            xv, yv = float(row[0]), float(row[1])
        except ValueError as exc:
            raise _DataError(f"{path}:{lineno}: non-numeric value") from exc
        if not (np.isfinite(xv) and np.isfinite(yv)):
            raise _DataError(f"{path}:{lineno}: non-finite value")
        if not 0.0 <= xv <= 1.0:
            raise _DataError(f"{path}:{lineno}: x={xv} outside [0, 1]")
        xs.append(xv)
        ys.append(yv)
    if len(xs) < 2:
        raise _DataError(f"{path}: need at least two data rows")
    return Sample(np.array(xs), np.array(ys))


def _bandwidths(cfg: CliConfig, sample: Sample):
    bw = pipeline_bandwidths(sample, cfg.model_kind)
    overrides = {}
    for name in ("h", "d", "b", "alpha"):
        v = getattr(cfg, name)
        if v is not None:
            overrides[name] = v
    if cfg.t is not None:
        overrides["t"] = cfg.t
    elif cfg.h is not None:
        overrides["t"] = None  # explicit h reverts to the h-tied margin
    if cfg.kernel_K != "gaussian":
        overrides["kernel"] = kernel_from_name(cfg.kernel_K)
    return replace(bw, **overrides) if overrides else bw


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_test(cfg: CliConfig) -> int:
    sample = _load_sample(cfg.input)
    bw = _bandwidths(cfg, sample)
    report = bootstrap_test(sample, cfg.tau, bw,
                            BootstrapConfig(B=cfg.B, level=cfg.level,
                                            seed=cfg.seed,
                                            workers=cfg.workers),
                            cfg.model_kind)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_REJECT if (report.reject_ks or report.reject_cvm) else EXIT_OK


def cmd_estimate(cfg: CliConfig) -> int:
    sample = _load_sample(cfg.input)
    bw = _bandwidths(cfg, sample)
    t = bw.trim
    m = cfg.grid_m
    grid_q = np.linspace(t, 1.0 - t, m)
    qhat = estimate_quantile_curve(sample, cfg.tau, bw, grid_x=grid_q)
    q_re = constrained_quantile_curve(qhat, t, m)
    grid_s = np.linspace(2 * t, 1.0 - 2 * t, m)
    shat = estimate_scale_curve(sample, qhat, bw, grid_x=grid_s)

    scurve = None if cfg.model_kind == "location" else shat
    q_used = q_re if cfg.model_kind == "monotone" else qhat
    trim = (2 * t, 1.0 - 2 * t)
    res = compute_residuals(sample, q_used, scurve, trim)
    marg = (compute_residuals(sample, qhat, scurve, trim)
            if cfg.model_kind == "monotone" else res)
    field = independence_process(res, marg, sample.n)

    os.makedirs(cfg.output, exist_ok=True)
    out = {}
    out["quantile"] = ("quantile.csv", ("x", "q"),
                       zip(map(_fmt, qhat.grid_x), map(_fmt, qhat.values)))
    out["rearranged"] = ("quantile_rearranged.csv", ("x", "q"),
                         zip(map(_fmt, q_re.grid_x), map(_fmt, q_re.values)))
    out["scale"] = ("scale.csv", ("x", "s"),
                    zip(map(_fmt, shat.grid_x), map(_fmt, shat.values)))
    out["residuals"] = ("residuals.csv", ("index", "x", "eps"),
                        zip(map(str, res.indices), map(_fmt, res.x),
                            map(_fmt, res.eps)))
    rows = ((_fmt(tv), _fmt(yv), _fmt(field.values[i, j]))
            for i, tv in enumerate(field.t_grid)
            for j, yv in enumerate(field.y_grid))
    out["field"] = ("process_field.csv", ("t", "y", "s_n"), rows)
    for name, (fname, header, data) in out.items():
        path = os.path.join(cfg.output, fname)
        _write_csv(path, header, data)
        print(path)
    return EXIT_OK


def cmd_simulate(cfg: CliConfig) -> int:
    try:
        model = model_spec(cfg.model, **dict(cfg.params))
    except ValueError as exc:
        print(f"qlstest simulate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run_study(model, n=cfg.n, runs=cfg.runs, B=cfg.B, tau=cfg.tau,
                       level=cfg.level, test_kind=cfg.model_kind,
                       root_seed=cfg.seed, workers=cfg.workers)
    row = result.to_row()
    lines = [",".join(row.keys()),
             ",".join(_fmt(v) if isinstance(v, float) else str(v)
                      for v in row.values())]
    text = "\n".join(lines) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = _config_from_args(ns, parser)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    dispatch = {"test": cmd_test, "estimate": cmd_estimate,
                "simulate": cmd_simulate}
    try:
        return dispatch[cfg.command](cfg)
    except _DataError as exc:
        print(f"qlstest: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except QlsError as exc:
        print(f"qlstest: data error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"qlstest: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
