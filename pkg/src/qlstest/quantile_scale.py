"""Non-crossing quantile and scale curves via the inversion functional H.

The estimator chain is

    q_hat_tau(x) = G^{-1}( H_{G,kappa,tau,b}( F_hat(.|x) ) ),
    s_hat(x)     = Gs^{-1}( H_{Gs,kappa,1/2,b}( F_hat_{|e|}(.|x) ) ),

with H(F) = int_0^1 [1 - KappaCdf((F(G^{-1}(u)) - tau)/b)] du  (the inner
kappa integral is analytic).  G and Gs are normal references whose 5%/95%
quantiles match the empirical ones of Y and |e| respectively.

Numerical evaluation of H
-------------------------
The integrand equals 1 while F(G^{-1}(u)) < tau-b, 0 once it exceeds tau+b,
and a cubic transition inside the band.  A fixed quadrature rule cannot see
where the band sits, so the evaluator

1. scans z(u) = F(G^{-1}(u)) on a coarse grid,
2. locates the first entry into the band and the last exit by bisection
   (in y-space, so no quantile transforms inside the loop), and
3. integrates the transition zone with composite Gauss-Legendre panels.

This is exact to ~1e-13 for F = G and for step functions, which a fixed
64-point rule is not.  For *indicator-mode* step CDFs the integral is instead
evaluated in closed form (`h_step_exact`) -- no quadrature at all.

F may be non-monotone (local cubic weights can be negative); the scan and
bisection pick the principal band entry/exit and the panels integrate any
wiggles inside the band where they matter.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .bandwidths import BandwidthSet
from .cond_cdf import LocalPolyConfig, Sample, local_poly_weight_matrix
from .errors import DegenerateSample, ScaleDegenerate
from .kernels import eval_Omega, eval_kappa_cdf

__all__ = [
    "NormalRef",
    "QuantileCurve",
    "Curve",
    "HProfile",
    "H_PRECISE",
    "H_CURVE",
    "H_FAST",
    "fit_normal_ref",
    "H_functional",
    "h_step_exact",
    "h_invert_batch",
    "default_grid",
    "estimate_quantile_curve",
    "estimate_scale_curve",
    "quantile_values_from_weights",
    "scale_values_from_weights",
]

_Z95 = float(ndtri(0.95))   # 1.6448536269514722
_ULO = 1e-12                # effective open-interval edge for u


@dataclass(frozen=True)
class NormalRef:
    """Normal reference distribution G (strictly increasing CDF)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")

    def cdf(self, y):
        return ndtr((np.asarray(y, dtype=float) - self.mu) / self.sigma)

    def quantile(self, u):
        return self.mu + self.sigma * ndtri(np.asarray(u, dtype=float))


def fit_normal_ref(values) -> NormalRef:
    """Normal reference whose 5% and 95% quantiles match the empirical ones.

    Empirical quantiles use the left-continuous inverse of the EDF.  Raises
    DegenerateSample when the two quantiles coincide (no usable spread).
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise DegenerateSample("need at least two values to fit a reference")
    q05, q95 = np.quantile(v, [0.05, 0.95], method="inverted_cdf")
    if not q95 > q05:
        raise DegenerateSample("5% and 95% quantiles coincide")
    return NormalRef(mu=float(0.5 * (q05 + q95)), sigma=float((q95 - q05) / (2.0 * _Z95)))


@dataclass
class QuantileCurve:
    """Piecewise linear curve on a strictly increasing grid inside [0, 1].

    Evaluation outside [grid_x[0], grid_x[-1]] is an error; the trimming
    workflow never needs it and silent extrapolation would hide bugs.
    """

    grid_x: np.ndarray
    values: np.ndarray
    tau: float

    def __post_init__(self):
        self.grid_x = np.asarray(self.grid_x, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.grid_x.size != self.values.size:
            raise ValueError("grid and values length mismatch")
        if self.grid_x.size < 2 or np.any(np.diff(self.grid_x) <= 0):
            raise ValueError("grid must be strictly increasing with >= 2 nodes")
        if self.grid_x[0] < 0.0 or self.grid_x[-1] > 1.0:
            raise ValueError("grid must lie in [0, 1]")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must be in (0, 1)")

    @property
    def a(self) -> float:
        return float(self.grid_x[0])

    @property
    def b(self) -> float:
        return float(self.grid_x[-1])

    def eval(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.grid_x[0] - 1e-12) or np.any(xa > self.grid_x[-1] + 1e-12):
            raise ValueError(
                f"evaluation outside curve domain [{self.a:.6g}, {self.b:.6g}]"
            )
        out = np.interp(np.clip(xa, self.grid_x[0], self.grid_x[-1]), self.grid_x, self.values)
        return float(out) if np.ndim(x) == 0 else out

    def eval_clamped(self, x):
        """Evaluate with x clamped into the domain (boundary value outside)."""
        xa = np.clip(np.asarray(x, dtype=float), self.grid_x[0], self.grid_x[-1])
        out = np.interp(xa, self.grid_x, self.values)
        return float(out) if np.ndim(x) == 0 else out


Curve = QuantileCurve


def default_grid(h: float, m: int = 201, lo_mult: float = 1.0) -> np.ndarray:
    """Equispaced grid of m nodes on [lo_mult*h, 1 - lo_mult*h]."""
    lo = lo_mult * h
    if not lo < 1.0 - lo:
        raise ValueError("trimmed interval is empty for this bandwidth")
    return np.linspace(lo, 1.0 - lo, m)


# ---------------------------------------------------------------------------
# H functional machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HProfile:
    """Resolution of the H evaluator: scan grid size, bisection iterations,
    composite panels and Gauss-Legendre nodes per panel."""

    scan: int
    iters: int
    panels: int
    nodes: int


H_PRECISE = HProfile(scan=1025, iters=56, panels=12, nodes=16)   # public H op
H_CURVE = HProfile(scan=65, iters=48, panels=8, nodes=12)        # curve fitting
H_FAST = HProfile(scan=33, iters=22, panels=3, nodes=6)          # bootstrap loop


def _rho(v):
    # 1 - KappaCdf(v): the analytic inner integral of the kappa window
    return 1.0 - eval_kappa_cdf(v)


@lru_cache(maxsize=8)
def _gl_nodes_cached(panels: int, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    xi = 0.5 * (x + 1.0)
    wt = 0.5 * w
    xi_all = np.concatenate([(k + xi) / panels for k in range(panels)])
    wt_all = np.tile(wt / panels, panels)
    return xi_all, wt_all


def _gl_nodes(profile: HProfile):
    return _gl_nodes_cached(profile.panels, profile.nodes)


def h_invert_batch(z_eval, n_rows: int, G: NormalRef, tau: float, b: float,
                   profile: HProfile = H_FAST) -> np.ndarray:
    """Evaluate H for a batch of conditional CDFs sharing the reference G.

    Parameters
    ----------
    z_eval : callable
        Maps a (n_rows, K) matrix of y-points to the (n_rows, K) matrix of
        CDF values F_r(y[r, k]); row r is the r-th conditional CDF.
    n_rows : number of CDFs in the batch
    G : NormalRef
    tau, b : inversion rule parameters
    profile : HProfile

    Returns
    -------
    (n_rows,) array of H values.
    """
    lo_level = tau - b
    hi_level = tau + b
    u_scan = np.linspace(_ULO, 1.0 - _ULO, profile.scan)
    y_scan = G.quantile(u_scan)
    z_scan = z_eval(y_scan)                              # shared abscissas
    if z_scan.shape != (n_rows, y_scan.size):
        raise ValueError("z_eval returned the wrong shape")

    # --- band edges from the scan ---------------------------------------------
    above = z_scan >= lo_level
    has_lo = above.any(axis=1)
    k_lo = np.argmax(above, axis=1)                      # first True (0 if none)
    u1 = np.where(has_lo, u_scan[k_lo], u_scan[-1])

    below = z_scan <= hi_level
    has_hi = below.any(axis=1)
    k_hi = profile.scan - 1 - np.argmax(below[:, ::-1], axis=1)   # last True
    u2 = np.where(has_hi, u_scan[k_hi], u_scan[0])

    # --- bisection refinement (both edges per z_eval call) --------------------
    need_lo = has_lo & (k_lo > 0)
    need_hi = has_hi & (k_hi < profile.scan - 1)
    if np.any(need_lo) or np.any(need_hi):
        lo_a = np.where(need_lo, y_scan[np.maximum(k_lo - 1, 0)], y_scan[0])
        lo_b = np.where(need_lo, y_scan[k_lo], y_scan[0])
        hi_a = np.where(need_hi, y_scan[k_hi], y_scan[0])
        hi_b = np.where(need_hi, y_scan[np.minimum(k_hi + 1, profile.scan - 1)], y_scan[0])
        for _ in range(profile.iters):
            m_lo = 0.5 * (lo_a + lo_b)
            m_hi = 0.5 * (hi_a + hi_b)
            zm = z_eval(np.stack([m_lo, m_hi], axis=1))  # (R, 2)
            go_lo = zm[:, 0] >= lo_level                 # crossing is left of mid
            lo_b = np.where(go_lo, m_lo, lo_b)
            lo_a = np.where(go_lo, lo_a, m_lo)
            go_hi = zm[:, 1] <= hi_level                 # exit is right of mid
            hi_a = np.where(go_hi, m_hi, hi_a)
            hi_b = np.where(go_hi, hi_b, m_hi)
        u1 = np.where(need_lo, G.cdf(lo_b), u1)
        u2 = np.where(need_hi, G.cdf(hi_a), u2)

    u2 = np.maximum(u2, u1)

    # --- composite Gauss-Legendre over the transition zone -------------------
    xi, wt = _gl_nodes(profile)
    span = u2 - u1
    u_nodes = u1[:, None] + span[:, None] * xi[None, :]
    z_nodes = z_eval(G.quantile(u_nodes))
    integ = np.einsum("rk,k->r", _rho((z_nodes - tau) / b), wt, optimize=False)
    return u1 + span * integ


def h_step_exact(u_edges: np.ndarray, z_segments: np.ndarray, tau: float, b: float):
    """Closed-form H for piecewise constant z(u).

    u_edges: (K+1,) increasing edges starting at 0 and ending at 1;
    z_segments: value of z on [u_edges[k], u_edges[k+1]); rows may be batched
    as (R, K).  Returns scalar or (R,) array.
    """
    du = np.diff(u_edges)
    z = np.asarray(z_segments, dtype=float)
    rho = _rho((z - tau) / b)
    if rho.ndim == 1:
        return float(np.dot(du, rho))
    return np.einsum("rk,k->r", rho, du, optimize=False)


def _vectorize_cdf(F):
    """Best-effort array evaluation of a user CDF callable."""
    probe = np.array([0.0, 1.0])
    try:
        out = np.asarray(F(probe), dtype=float)
        if out.shape == probe.shape:
            return lambda y: np.asarray(F(y), dtype=float)
    except Exception:
        pass
    return np.vectorize(lambda t: float(F(t)), otypes=[float])


def H_functional(F, G: NormalRef, tau: float, b: float,
                 profile: HProfile = H_PRECISE) -> float:
    """H_{G,kappa,tau,b}(F) = int_0^1 [1 - KappaCdf((F(G^{-1}(u))-tau)/b)] du.

    F is any CDF-like callable (values may stray outside [0,1]; the formula
    is well-defined regardless).
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    if not b > 0.0:
        raise ValueError("b must be positive")
    f = _vectorize_cdf(F)

    def z_eval(y):
        ya = np.atleast_2d(np.asarray(y, dtype=float))
        return f(ya.ravel()).reshape(ya.shape)

    return float(h_invert_batch(z_eval, 1, G, tau, b, profile)[0])


# ---------------------------------------------------------------------------
# curve estimation
# ---------------------------------------------------------------------------

def _omega_slim(t):
    # clip+Horner version of eval_Omega for the hot loop (identical values up
    # to ulp; the polynomial hits 0/1 at the clipped endpoints by itself)
    t = np.clip(t, -1.0, 1.0)
    t2 = t * t
    return 0.5 + (15.0 / 32.0) * t * (3.0 - (10.0 / 3.0) * t2 + (7.0 / 5.0) * t2 * t2)


def _smoothed_z_eval(weights: np.ndarray, resp: np.ndarray, d: float, chunk: int = 64):
    """Row-wise smoothed CDF evaluator: z[r,k] = sum_j W[r,j] Omega((y[r,k]-Y_j)/d).

    Accepts a shared 1-D abscissa vector (one Omega table for all rows) or a
    per-row (R, K) matrix (chunked batched matmul).
    """

    def z_eval(y):
        if y.ndim == 1:
            t = _omega_slim((y[:, None] - resp[None, :]) / d)    # (K, n)
            return weights @ t.T
        out = np.empty(y.shape)
        for s in range(0, y.shape[1], chunk):
            blk = y[:, s:s + chunk]
            t = _omega_slim((blk[:, :, None] - resp[None, None, :]) / d)
            out[:, s:s + chunk] = np.matmul(t, weights[:, :, None])[:, :, 0]
        return out

    return z_eval


def quantile_values_from_weights(weights: np.ndarray, resp: np.ndarray, d: float,
                                 G: NormalRef, tau: float, b: float,
                                 profile: HProfile = H_CURVE) -> np.ndarray:
    """q values at the evaluation points encoded by the weight matrix rows."""
    z_eval = _smoothed_z_eval(weights, resp, d)
    hvals = h_invert_batch(z_eval, weights.shape[0], G, tau, b, profile)
    return G.quantile(np.clip(hvals, _ULO, 1.0 - _ULO))


def scale_values_from_weights(weights: np.ndarray, abs_e: np.ndarray,
                              G_s: NormalRef, b: float, d: float | None = None,
                              mode: str = "indicator",
                              profile: HProfile = H_CURVE) -> np.ndarray:
    """s values at the evaluation points encoded by the weight matrix rows.

    Indicator mode (the default per the scale-estimator definition) evaluates
    H in closed form; smoothed_Omega mode goes through the quadrature engine.
    """
    if mode == "indicator":
        order = np.argsort(abs_e, kind="stable")
        u_jumps = G_s.cdf(abs_e[order])
        u_edges = np.concatenate(([0.0], u_jumps, [1.0]))
        cum = np.cumsum(weights[:, order], axis=1)
        z_segments = np.concatenate((np.zeros((weights.shape[0], 1)), cum), axis=1)
        hvals = h_step_exact(u_edges, z_segments, 0.5, b)
    elif mode == "smoothed_Omega":
        if d is None:
            raise ValueError("smoothed_Omega mode needs the d bandwidth")
        z_eval = _smoothed_z_eval(weights, abs_e, d)
        hvals = h_invert_batch(z_eval, weights.shape[0], G_s, 0.5, b, profile)
    else:
        raise ValueError(f"unknown scale mode {mode!r}")
    return G_s.quantile(np.clip(hvals, _ULO, 1.0 - _ULO))


def _lp_config(bw: BandwidthSet) -> LocalPolyConfig:
    return LocalPolyConfig(h=bw.h, d=bw.d, p=bw.p, kernel_K=bw.kernel)


def quantile_at(sample: Sample, tau: float, bw: BandwidthSet, x_points,
                profile: HProfile = H_CURVE) -> np.ndarray:
    """q_hat_tau evaluated directly at arbitrary points (no curve, no interp)."""
    xp = np.atleast_1d(np.asarray(x_points, dtype=float))
    G = fit_normal_ref(sample.y)
    W = local_poly_weight_matrix(xp, sample.x, _lp_config(bw))
    return quantile_values_from_weights(W, sample.y, bw.d, G, tau, bw.b, profile)


def estimate_quantile_curve(sample: Sample, tau: float, bw: BandwidthSet,
                            grid_x=None, profile: HProfile = H_CURVE) -> QuantileCurve:
    """Non-crossing quantile curve on a grid inside [t, 1-t]."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    if grid_x is None:
        grid_x = default_grid(bw.trim)
    grid_x = np.asarray(grid_x, dtype=float)
    if grid_x[0] < bw.trim - 1e-12 or grid_x[-1] > 1.0 - bw.trim + 1e-12:
        raise ValueError("quantile grid must lie inside [t, 1-t]")
    vals = quantile_at(sample, tau, bw, grid_x, profile)
    return QuantileCurve(grid_x, vals, tau)


def estimate_scale_curve(sample: Sample, qhat: QuantileCurve, bw: BandwidthSet,
                         grid_x=None, mode: str = "indicator",
                         profile: HProfile = H_CURVE) -> Curve:
    """Scale curve s_hat on a grid inside [2t, 1-2t].

    Residuals e_i = Y_i - q_hat(X_i) are built on the subsample X_i in
    [t, 1-t], with q_hat evaluated directly at the X_i (the curve argument
    supplies tau and documents the fit; no grid interpolation enters here).
    """
    if qhat.a > bw.trim + 1e-12 or qhat.b < 1.0 - bw.trim - 1e-12:
        raise ValueError("quantile curve must cover [t, 1-t]")
    if grid_x is None:
        grid_x = default_grid(bw.trim, lo_mult=2.0)
    grid_x = np.asarray(grid_x, dtype=float)
    if grid_x[0] < 2.0 * bw.trim - 1e-12 or grid_x[-1] > 1.0 - 2.0 * bw.trim + 1e-12:
        raise ValueError("scale grid must lie inside [2t, 1-2t]")

    sub = (sample.x >= bw.trim) & (sample.x <= 1.0 - bw.trim)
    if sub.sum() < bw.p + 2:
        raise DegenerateSample("too few interior observations for the scale fit")
    x_sub = sample.x[sub]
    abs_e = np.abs(sample.y[sub] - quantile_at(sample, qhat.tau, bw, x_sub, profile))
    G_s = fit_normal_ref(abs_e)
    W = local_poly_weight_matrix(grid_x, x_sub, _lp_config(bw))
    svals = scale_values_from_weights(W, abs_e, G_s, bw.b, d=bw.d, mode=mode, profile=profile)
    if np.any(svals <= 0.0):
        raise ScaleDegenerate("scale estimate nonpositive at a grid node")
    return Curve(grid_x, svals, tau=0.5)
