"""Smooth residual bootstrap calibration for the specification tests.

Three test pipelines share one statistic engine:

  location        residuals Y - qhat(X), process S_n
  location_scale  residuals (Y - qhat(X)) / shat(X), process S_n
  monotone        constrained residuals from the rearranged curve in the
                  joint part, unconstrained in the marginal part (S_{n,I})

Bootstrap observations are Y*_i = center(X_i) + shat(X_i) eps*_i with
eps* drawn from the smoothed EDF of the trimmed residuals, and the full
estimation chain is re-run on (X, Y*) with the data bandwidths.  The
bootstrap statistic restricts to the same (2t, 1-2t] covariate window the
data statistic uses, so the calibrating law matches the null law of the
observed statistic.

Because the covariates are fixed across replications, all local-polynomial
weight matrices are precomputed once; a replication only re-runs the
response-dependent half of the pipeline.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import ndtr

from .bandwidths import BandwidthSet, bootstrap_alpha
from .cond_cdf import LocalPolyConfig, Sample, local_poly_weight_matrix
from .errors import (BootstrapUnstable, DegenerateSample, ScaleDegenerate,
                     SingularDesign, TrimEmpty)
from .quantile_scale import (H_CURVE, H_FAST, Curve, HProfile, fit_normal_ref,
                             quantile_values_from_weights,
                             scale_values_from_weights)
from .residual_process import (ResidualSet, cvm_statistic,
                               independence_process, ks_statistic)

__all__ = [
    "BootstrapConfig",
    "SmoothErrorCdf",
    "TestReport",
    "smooth_error_cdf_eval",
    "draw_bootstrap_errors",
    "bootstrap_replication",
    "bootstrap_test",
]

MODELS = ("location", "location_scale", "monotone")
_Q_GRID_M = 101   # pipeline grid for the (rearranged) quantile curve
_S_GRID_M = 201   # pipeline grid for the scale curve


@dataclass(frozen=True)
class BootstrapConfig:
    B: int
    level: float = 0.05
    seed: int = 0
    center: Optional[str] = None  # None: chosen by the model kind
    workers: int = 1

    def __post_init__(self):
        if self.B < 1:
            raise ValueError(f"B must be >= 1, got {self.B}")
        if not (0 < self.level < 1):
            raise ValueError(f"level must be in (0,1), got {self.level}")
        if self.center not in (None, "unconstrained_q", "rearranged_q"):
            raise ValueError(f"unknown center {self.center!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class SmoothErrorCdf:
    """Mixture of normal CDFs centered at the trimmed residuals."""

    residuals: np.ndarray
    alpha: float

    def __post_init__(self):
        if len(self.residuals) == 0:
            raise ValueError("empty residual set")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


def smooth_error_cdf_eval(cdf: SmoothErrorCdf, y) -> float:
    y = np.asarray(y, dtype=float)
    out = np.mean(ndtr((y[..., None] - cdf.residuals) / cdf.alpha), axis=-1)
    return out if out.shape else float(out)


def draw_bootstrap_errors(cdf: SmoothErrorCdf, n: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Resample residuals with replacement and add alpha * N(0,1) noise."""
    idx = rng.integers(0, len(cdf.residuals), size=n)
    return cdf.residuals[idx] + cdf.alpha * rng.standard_normal(n)


@dataclass(frozen=True)
class TestReport:
    statistic_ks: float
    statistic_cvm: float
    critical_ks: float
    critical_cvm: float
    p_ks: float
    p_cvm: float
    reject_ks: bool
    reject_cvm: bool
    B_effective: int
    config: dict

    def to_dict(self) -> dict:
        return {
            "statistic_ks": self.statistic_ks,
            "statistic_cvm": self.statistic_cvm,
            "critical_ks": self.critical_ks,
            "critical_cvm": self.critical_cvm,
            "p_ks": self.p_ks,
            "p_cvm": self.p_cvm,
            "reject_ks": self.reject_ks,
            "reject_cvm": self.reject_cvm,
            "B_effective": self.B_effective,
            "config": self.config,
        }


# ---------------------------------------------------------------------------
# statistic engine


@dataclass(frozen=True)
class _Ctx:
    """Everything response-independent, precomputed once per covariate set."""

    x: np.ndarray
    n: int
    tau: float
    bw: BandwidthSet
    model: str
    profile: HProfile
    trim_lo: float
    trim_hi: float
    idx_trim: np.ndarray
    x_trim: np.ndarray
    idx_sub: np.ndarray          # scale-stage subsample [h, 1-h]
    x_sub: np.ndarray
    w_q_sub: Optional[np.ndarray]      # qhat at subsample points
    w_q_trim: Optional[np.ndarray]     # direct path: qhat at trimmed points
    w_s_trim: Optional[np.ndarray]     # direct path: shat at trimmed points
    q_grid: Optional[np.ndarray]       # monotone path: curve grids
    w_q_grid: Optional[np.ndarray]
    s_grid: Optional[np.ndarray]
    w_s_grid: Optional[np.ndarray]


def _build_ctx(x: np.ndarray, tau: float, bw: BandwidthSet, model: str,
               trim_mult: int, profile: HProfile) -> _Ctx:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    n = len(x)
    t = bw.trim
    lo, hi = trim_mult * t, 1.0 - trim_mult * t
    if not lo < hi:
        raise TrimEmpty(f"trim interval ({lo}, {hi}] is empty")
    mask = (x > lo) & (x <= hi)
    if not np.any(mask):
        raise TrimEmpty(f"no covariates in ({lo}, {hi}] out of n={n}")
    idx_trim = np.nonzero(mask)[0]
    x_trim = x[idx_trim]

    cfg = LocalPolyConfig(h=bw.h, d=bw.d, p=bw.p, kernel_K=bw.kernel)
    sub = (x >= t) & (x <= 1.0 - t)
    idx_sub = np.nonzero(sub)[0]
    x_sub = x[idx_sub]

    needs_scale = model in ("location_scale", "monotone")
    w_q_sub = w_q_trim = w_s_trim = None
    q_grid = w_q_grid = s_grid = w_s_grid = None
    if needs_scale:
        if idx_sub.size < bw.p + 2:
            raise DegenerateSample("too few interior observations for the scale fit")
        w_q_sub = local_poly_weight_matrix(x_sub, x, cfg)
    if model == "monotone":
        q_grid = np.linspace(t, 1.0 - t, _Q_GRID_M)
        w_q_grid = local_poly_weight_matrix(q_grid, x, cfg)
        s_grid = np.linspace(2 * t, 1.0 - 2 * t, _S_GRID_M)
        w_s_grid = local_poly_weight_matrix(s_grid, x_sub, cfg)
    else:
        w_q_trim = local_poly_weight_matrix(x_trim, x, cfg)
        if needs_scale:
            w_s_trim = local_poly_weight_matrix(x_trim, x_sub, cfg)
    return _Ctx(x, n, tau, bw, model, profile, lo, hi, idx_trim, x_trim,
                idx_sub, x_sub, w_q_sub, w_q_trim, w_s_trim,
                q_grid, w_q_grid, s_grid, w_s_grid)


def _scale_at(ctx: _Ctx, weights: np.ndarray, abs_e: np.ndarray) -> np.ndarray:
    g_s = fit_normal_ref(abs_e)
    vals = scale_values_from_weights(weights, abs_e, g_s, ctx.bw.b,
                                     profile=ctx.profile)
    if np.any(vals <= 0):
        raise ScaleDegenerate("nonpositive scale estimate")
    return vals


def _statistic(ctx: _Ctx, y: np.ndarray):
    """Run the estimation chain on (ctx.x, y); return (K, C, extras).

    extras carries the unconstrained residual pool and, for curve-based
    pipelines, the fitted curves (for bootstrap centering).
    """
    bw, tau = ctx.bw, ctx.tau
    g_ref = fit_normal_ref(y)
    y_trim = y[ctx.idx_trim]
    extras = {}

    if ctx.model == "monotone":
        q_vals = quantile_values_from_weights(ctx.w_q_grid, y, bw.d, g_ref,
                                              tau, bw.b, ctx.profile)
        q_i_vals = np.sort(q_vals, kind="stable")
        abs_e = np.abs(y[ctx.idx_sub]
                       - quantile_values_from_weights(ctx.w_q_sub, y, bw.d,
                                                      g_ref, tau, bw.b,
                                                      ctx.profile))
        s_vals = _scale_at(ctx, ctx.w_s_grid, abs_e)
        s_at = np.interp(ctx.x_trim, ctx.s_grid, s_vals)
        eps_u = (y_trim - np.interp(ctx.x_trim, ctx.q_grid, q_vals)) / s_at
        eps_i = (y_trim - np.interp(ctx.x_trim, ctx.q_grid, q_i_vals)) / s_at
        num = ResidualSet(ctx.idx_trim, ctx.x_trim, eps_i, ctx.trim_lo, ctx.trim_hi)
        marg = ResidualSet(ctx.idx_trim, ctx.x_trim, eps_u, ctx.trim_lo, ctx.trim_hi)
        extras["qcurve"] = Curve(ctx.q_grid, q_vals, tau)
        extras["qcurve_rearranged"] = Curve(ctx.q_grid, q_i_vals, tau)
        extras["scurve"] = Curve(ctx.s_grid, s_vals, 0.5)
    else:
        q_trim = quantile_values_from_weights(ctx.w_q_trim, y, bw.d, g_ref,
                                              tau, bw.b, ctx.profile)
        if ctx.model == "location_scale":
            abs_e = np.abs(y[ctx.idx_sub]
                           - quantile_values_from_weights(ctx.w_q_sub, y, bw.d,
                                                          g_ref, tau, bw.b,
                                                          ctx.profile))
            s_trim = _scale_at(ctx, ctx.w_s_trim, abs_e)
            eps = (y_trim - q_trim) / s_trim
        else:
            eps = y_trim - q_trim
        num = marg = ResidualSet(ctx.idx_trim, ctx.x_trim, eps,
                                 ctx.trim_lo, ctx.trim_hi)

    field = independence_process(num, marg, ctx.n)
    k_stat = ks_statistic(field)
    c_stat = cvm_statistic(field, ctx.x, marg)
    extras["pool"] = marg.eps
    return k_stat, c_stat, extras


# ---------------------------------------------------------------------------
# replication


def _replicate(ctx: _Ctx, center_vals: np.ndarray, scale_vals: np.ndarray,
               cdf: SmoothErrorCdf, rng: np.random.Generator):
    eps_star = draw_bootstrap_errors(cdf, ctx.n, rng)
    y_star = center_vals + scale_vals * eps_star
    k_stat, c_stat, _ = _statistic(ctx, y_star)
    return k_stat, c_stat


def _center_scale_values(x: np.ndarray, center_curve: Curve,
                         scurve: Optional[Curve]):
    center_vals = center_curve.eval_clamped(x)
    scale_vals = (np.ones_like(x) if scurve is None
                  else scurve.eval_clamped(x))
    return center_vals, scale_vals


def bootstrap_replication(sample_x: np.ndarray, center_curve: Curve,
                          scurve: Optional[Curve], cdf: SmoothErrorCdf,
                          bw: BandwidthSet, test_kind: str,
                          rng: np.random.Generator) -> Tuple[float, float]:
    """One bootstrap draw: build Y*, re-estimate, return (K*, C*).

    Convenience entry point; bootstrap_test precomputes the context once
    instead of rebuilding it per replication.
    """
    x = np.asarray(sample_x, dtype=float)
    ctx = _build_ctx(x, center_curve.tau, bw, test_kind, 2, H_FAST)
    center_vals, scale_vals = _center_scale_values(x, center_curve, scurve)
    return _replicate(ctx, center_vals, scale_vals, cdf, rng)


def _run_indices(args):
    ctx, center_vals, scale_vals, cdf, seed, indices, B = args
    children = np.random.SeedSequence(seed).spawn(B)
    out = []
    for b in indices:
        rng = np.random.default_rng(children[b])
        try:
            out.append((b, *_replicate(ctx, center_vals, scale_vals, cdf, rng)))
        except (SingularDesign, DegenerateSample, ScaleDegenerate, TrimEmpty):
            out.append((b, None, None))
    return out


def _critical(sorted_stats: np.ndarray, level: float) -> float:
    b_eff = len(sorted_stats)
    k = math.ceil((1.0 - level) * (b_eff + 1))
    k = min(max(k, 1), b_eff)
    return float(sorted_stats[k - 1])


def _p_value(stats: np.ndarray, observed: float, b_eff: int) -> float:
    return (1.0 + int(np.count_nonzero(stats >= observed))) / (b_eff + 1.0)


def bootstrap_test(sample: Sample, tau: float, bw: BandwidthSet,
                   cfg: BootstrapConfig, model: str) -> TestReport:
    """Full bootstrap-calibrated test; see the module docstring.

    Rejects when the observed statistic reaches the ceil((1-level)(B+1))-th
    order statistic of the bootstrap statistics; the p-value uses the
    (1 + count)/(B + 1) convention.  Raises BootstrapUnstable when more than
    10% of replications fail.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    x = sample.x
    center_kind = cfg.center
    if center_kind is None:
        center_kind = "rearranged_q" if model == "monotone" else "unconstrained_q"

    ctx_data = _build_ctx(x, tau, bw, model, 2, H_CURVE)
    k_obs, c_obs, extras = _statistic(ctx_data, sample.y)

    # data curves for generating Y*
    if model == "monotone":
        qcurve = extras["qcurve"]
        q_center = (extras["qcurve_rearranged"]
                    if center_kind == "rearranged_q" else qcurve)
        scurve = extras["scurve"]
    else:
        cfg_lp = LocalPolyConfig(h=bw.h, d=bw.d, p=bw.p, kernel_K=bw.kernel)
        grid_q = np.linspace(bw.trim, 1.0 - bw.trim, _S_GRID_M)
        g_ref = fit_normal_ref(sample.y)
        w_grid = local_poly_weight_matrix(grid_q, x, cfg_lp)
        q_vals = quantile_values_from_weights(w_grid, sample.y, bw.d, g_ref,
                                              tau, bw.b, H_CURVE)
        qcurve = Curve(grid_q, q_vals, tau)
        q_center = (Curve(grid_q, np.sort(q_vals, kind="stable"), tau)
                    if center_kind == "rearranged_q" else qcurve)
        scurve = None
        if model == "location_scale":
            grid_s = np.linspace(2 * bw.trim, 1.0 - 2 * bw.trim, _S_GRID_M)
            w_s_grid = local_poly_weight_matrix(grid_s, ctx_data.x_sub, cfg_lp)
            abs_e = np.abs(sample.y[ctx_data.idx_sub]
                           - quantile_values_from_weights(
                               ctx_data.w_q_sub, sample.y, bw.d, g_ref,
                               tau, bw.b, H_CURVE))
            scurve = Curve(grid_s, _scale_at(ctx_data, w_s_grid, abs_e), 0.5)

    pool = extras["pool"]
    alpha = bw.alpha if bw.alpha > 0 else bootstrap_alpha(pool, sample.n)
    cdf = SmoothErrorCdf(pool, alpha)

    ctx_boot = _build_ctx(x, tau, bw, model, 2, H_FAST)
    center_vals, scale_vals = _center_scale_values(x, q_center, scurve)

    all_indices = np.arange(cfg.B)
    if cfg.workers == 1 or cfg.B == 1:
        results = _run_indices((ctx_boot, center_vals, scale_vals, cdf,
                                cfg.seed, all_indices, cfg.B))
    else:
        chunks = np.array_split(all_indices, cfg.workers)
        results = []
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            futs = [ex.submit(_run_indices,
                              (ctx_boot, center_vals, scale_vals, cdf,
                               cfg.seed, chunk, cfg.B))
                    for chunk in chunks if len(chunk)]
            for f in futs:
                results.extend(f.result())

    results.sort(key=lambda r: r[0])
    ks_stars = np.array([r[1] for r in results if r[1] is not None])
    cvm_stars = np.array([r[2] for r in results if r[2] is not None])
    failed = cfg.B - len(ks_stars)
    if failed > 0.1 * cfg.B:
        raise BootstrapUnstable(
            f"{failed} of {cfg.B} bootstrap replications failed")

    b_eff = len(ks_stars)
    crit_ks = _critical(np.sort(ks_stars), cfg.level)
    crit_cvm = _critical(np.sort(cvm_stars), cfg.level)
    report = TestReport(
        statistic_ks=k_obs,
        statistic_cvm=c_obs,
        critical_ks=crit_ks,
        critical_cvm=crit_cvm,
        p_ks=_p_value(ks_stars, k_obs, b_eff),
        p_cvm=_p_value(cvm_stars, c_obs, b_eff),
        reject_ks=bool(k_obs >= crit_ks),
        reject_cvm=bool(c_obs >= crit_cvm),
        B_effective=b_eff,
        config={
            "model": model,
            "tau": tau,
            "level": cfg.level,
            "B": cfg.B,
            "seed": cfg.seed,
            "center": center_kind,
            "n": sample.n,
            "h": bw.h,
            "d": bw.d,
            "b": bw.b,
            "t": bw.trim,
            "alpha": alpha,
        },
    )
    return report
