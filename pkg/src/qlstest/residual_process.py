"""Trimmed residuals, the covariate-residual independence process, and the
KS / CvM statistics built from it.

The process compares the joint empirical distribution of (X_i, eps_i) with
the product of its marginals, restricted to covariates in a boundary-trimmed
interval (lo, hi]:

    S_n(t, y) = sqrt(n) * ( F_hat(t, y) - F_hat(hi, y) * F_hat(t, inf) )

where F_hat is the trim-normalized joint EDF.  Two residual sets can be mixed:
the joint part built from one set (e.g. residuals from a monotonicity-
constrained curve) and the y-marginal from another (unconstrained residuals).
All fields are piecewise constant, so suprema are attained on the grid of
data points; the grids below carry a +inf sentinel column where the process
vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ScaleDegenerate, TrimEmpty
from .quantile_scale import Curve

__all__ = [
    "ResidualSet",
    "ProcessField",
    "compute_residuals",
    "joint_edf",
    "independence_process",
    "ks_statistic",
    "cvm_statistic",
    "degenerate_diagnostics",
]


@dataclass(frozen=True)
class ResidualSet:
    """Residuals for observations with trim_lo < X_i <= trim_hi.

    Attributes
    ----------
    indices : ndarray
        Positions of the retained observations in the original sample.
    x : ndarray
        Covariates of the retained observations (same order as indices).
    eps : ndarray
        Residuals, paired with x by position.
    trim_lo, trim_hi : float
        Trimming interval, (2t, 1-2t]; data and bootstrap residuals use
        the same window.
    """

    indices: np.ndarray
    x: np.ndarray
    eps: np.ndarray
    trim_lo: float
    trim_hi: float

    def __post_init__(self):
        if not (len(self.indices) == len(self.x) == len(self.eps)):
            raise ValueError("indices, x, eps must have equal length")
        if len(self.eps) == 0:
            raise TrimEmpty(
                f"no observations in ({self.trim_lo}, {self.trim_hi}]"
            )
        if not (self.trim_lo < self.trim_hi):
            raise ValueError("trim_lo must be < trim_hi")

    @property
    def n_trim(self) -> int:
        return len(self.eps)


@dataclass(frozen=True)
class ProcessField:
    """S evaluated on the full grid of jump points.

    values[i, j] = S(t_grid[i], y_grid[j]); the last y_grid entry is +inf
    where the process is identically zero.  S is defined as 0 for t outside
    (trim_lo, trim_hi].
    """

    t_grid: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray
    trim_lo: float
    trim_hi: float
    n: int


def compute_residuals(sample, qcurve: Curve, scurve_or_one: Optional[Curve],
                      trim: Tuple[float, float]) -> ResidualSet:
    """Build residuals (Y_i - qhat(X_i)) / shat(X_i) on the trim interval.

    Pass scurve_or_one=None for the location model (shat == 1).  Curves are
    evaluated by linear interpolation of their grids.
    """
    lo, hi = float(trim[0]), float(trim[1])
    mask = (sample.x > lo) & (sample.x <= hi)
    if not np.any(mask):
        raise TrimEmpty(f"no covariates in ({lo}, {hi}] out of n={sample.n}")
    idx = np.nonzero(mask)[0]
    xt = sample.x[idx]
    q_vals = qcurve.eval(xt)
    if scurve_or_one is None:
        eps = sample.y[idx] - q_vals
    else:
        s_vals = scurve_or_one.eval(xt)
        if np.any(s_vals <= 0):
            raise ScaleDegenerate("scale curve nonpositive at a data point")
        eps = (sample.y[idx] - q_vals) / s_vals
    return ResidualSet(idx, xt, eps, lo, hi)


def _check_shared_trim(a: ResidualSet, b: ResidualSet) -> None:
    if a.trim_lo != b.trim_lo or a.trim_hi != b.trim_hi:
        raise ValueError("residual sets have different trimming intervals")
    if not np.array_equal(a.indices, b.indices):
        raise ValueError("residual sets cover different observations")


def joint_edf(res: ResidualSet, res_for_marginal: ResidualSet,
              t: float, y: float) -> float:
    """Trim-normalized joint EDF: #{eps_i <= y, X_i <= t} / n_trim.

    res supplies the (X_i, eps_i) pairs; res_for_marginal only pins down the
    shared trimming (it matters in the process construction, where joint and
    marginal parts may come from different residual sets).
    """
    _check_shared_trim(res, res_for_marginal)
    if not (res.trim_lo <= t <= res.trim_hi):
        raise ValueError(f"t={t} outside [{res.trim_lo}, {res.trim_hi}]")
    count = np.count_nonzero((res.x <= t) & (res.eps <= y))
    return count / res.n_trim


def _group_ends(sorted_vals: np.ndarray) -> np.ndarray:
    """Index of the last occurrence of each value's tie group."""
    return np.searchsorted(sorted_vals, sorted_vals, side="right") - 1


def independence_process(num_res: ResidualSet, marg_res: ResidualSet,
                         n: int) -> ProcessField:
    """S(t,y) = sqrt(n)(F_num(t,y) - F_marg(hi,y) F_num(t,inf)) on the grid.

    num_res = marg_res gives the plain independence process; passing
    constrained residuals as num_res with unconstrained marg_res gives the
    mixed process used by the monotonicity test.
    """
    _check_shared_trim(num_res, marg_res)
    nt = num_res.n_trim
    order = np.argsort(num_res.x, kind="stable")
    t_grid = num_res.x[order]
    eps_sorted_by_x = num_res.eps[order]
    y_grid = np.unique(np.concatenate([num_res.eps, marg_res.eps]))
    y_grid = np.append(y_grid, np.inf)

    # joint counts: cumulate indicator rows in covariate order, then replace
    # each row by its tie-group end so duplicated t values get full counts
    ind = (eps_sorted_by_x[:, None] <= y_grid[None, :]).astype(np.float64)
    cum = np.cumsum(ind, axis=0)
    ends = _group_ends(t_grid)
    joint = cum[ends] / nt

    t_marg = joint[:, -1]
    marg_sorted = np.sort(marg_res.eps)
    y_marg = np.searchsorted(marg_sorted, y_grid, side="right") / marg_res.n_trim

    values = np.sqrt(n) * (joint - t_marg[:, None] * y_marg[None, :])
    return ProcessField(t_grid, y_grid, values,
                        num_res.trim_lo, num_res.trim_hi, n)


def ks_statistic(field: ProcessField) -> float:
    """sup |S| over the grid (the continuous sup: S is a step field)."""
    return float(np.max(np.abs(field.values)))


def cvm_statistic(field: ProcessField, all_x: np.ndarray,
                  marg_res: ResidualSet) -> float:
    """(1/n) sum_i (1/n_trim) sum_j S^2(X_i, eps_j).

    The outer sum runs over every covariate in the sample; X_i outside the
    trim interval contribute 0 because S vanishes there.  The inner sum runs
    over the trimmed marginal residuals.
    """
    all_x = np.asarray(all_x, dtype=float)
    sq = field.values**2
    cols = np.searchsorted(field.y_grid, marg_res.eps, side="right") - 1
    if np.any(cols < 0):
        # residuals below every grid point sit in the S == 0 zone
        keep = cols >= 0
        inner = np.zeros(sq.shape[0])
        if np.any(keep):
            inner = sq[:, cols[keep]].sum(axis=1)
        inner /= marg_res.n_trim
    else:
        inner = sq[:, cols].mean(axis=1)
    rows = np.searchsorted(field.t_grid, all_x, side="right") - 1
    inside = (all_x > field.trim_lo) & (all_x <= field.trim_hi) & (rows >= 0)
    return float(inner[rows[inside]].sum() / len(all_x))


def degenerate_diagnostics(res_I: ResidualSet, all_x: np.ndarray, tau: float,
                           n: int, marg_res: ResidualSet):
    """Degenerate processes built from constrained residuals, for validation.

    Returns (sup_t |R_n(t)|, sup_y |S_tilde(trim_hi, y)|) where

        R_n(t) = n^{-1/2} sum_trim (I{eps_I <= 0} - tau) I{X_i <= t}
        S_tilde(hi, y) = n^{-1/2} sum_trim (I{eps_I <= y} - F_eps(y))

    with F_eps the EDF of the unconstrained residuals marg_res.  Both have
    degenerate limits under the null, so they carry no usable critical
    values; they are reported as diagnostics only.
    """
    if len(all_x) != n:
        raise ValueError("all_x must contain the full covariate sample")
    order = np.argsort(res_I.x, kind="stable")
    xs = res_I.x[order]
    terms = (res_I.eps[order] <= 0).astype(np.float64) - tau
    pref = np.cumsum(terms)
    ends = _group_ends(xs)
    r_sup = float(np.max(np.abs(pref[ends])) / np.sqrt(n))

    _check_shared_trim(res_I, marg_res)
    y_eval = np.unique(np.concatenate([res_I.eps, marg_res.eps]))
    cnt_i = np.searchsorted(np.sort(res_I.eps), y_eval, side="right")
    f_marg = (np.searchsorted(np.sort(marg_res.eps), y_eval, side="right")
              / marg_res.n_trim)
    s_tilde = (cnt_i - res_I.n_trim * f_marg) / np.sqrt(n)
    s_sup = float(np.max(np.abs(s_tilde)))
    return r_sup, s_sup
