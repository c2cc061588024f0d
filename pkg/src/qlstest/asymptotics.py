"""Limit-theory objects for the independence process: the expansion
functions phi/psi, the influence function g, and the covariance of the
limiting Gaussian field.

Validation-only: the statistical tests are bootstrap-calibrated and never
consume this module.  It exists so the process implementation can be checked
against the theory it is supposed to obey.

The error model is normalized so the tau-quantile of eps is 0 and the median
of |eps| is 1.  With F and f the error CDF/density,

    phi(y) = f(y)/f(0) * (1 - y (f(1) - f(-1)) / f_abs(1))
    psi(y) = y f(y) / f_abs(1),        f_abs(y) = f(y) + f(-y)

    g(eps, y) = I{eps<=y} - F(y) - phi(y)(I{eps<=0} - tau)
                - psi(y)(I{|eps|<=1} - 1/2)

and Cov(S(s,y), S(t,z)) = (F_X(s^t) - F_X(s)F_X(t)) * E[g(eps,y) g(eps,z)],
with the expectation available in closed form (the bracket below).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import t as student_t_dist

__all__ = [
    "ErrorModel",
    "LimitCovarianceSpec",
    "rescale_error_model",
    "normal_error_model",
    "student_t_error_model",
    "phi",
    "psi",
    "influence",
    "limit_covariance",
    "location_limit_covariance",
    "mc_expansion_covariance",
]

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ErrorModel:
    """Normalized error distribution: F(0) = tau and F(1) - F(-1) = 1/2."""

    F_eps: Callable[[np.ndarray], np.ndarray]
    f_eps: Callable[[np.ndarray], np.ndarray]
    tau: float
    family: str = "custom"
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def __post_init__(self):
        if not (0 < self.tau < 1):
            raise ValueError(f"tau must be in (0,1), got {self.tau}")
        q0 = float(self.F_eps(0.0))
        if abs(q0 - self.tau) > _NORM_TOL:
            raise ValueError(
                f"F(0)={q0} != tau={self.tau}: model not quantile-normalized")
        med = float(self.F_eps(1.0) - self.F_eps(-1.0))
        if abs(med - 0.5) > _NORM_TOL:
            raise ValueError(
                f"F(1)-F(-1)={med} != 1/2: |eps| not median-normalized")


@dataclass(frozen=True)
class _RawModel:
    F_eps: Callable
    f_eps: Callable
    tau: float
    family: str = "custom"
    sampler: Optional[Callable] = None


@dataclass(frozen=True)
class LimitCovarianceSpec:
    error_model: ErrorModel
    F_X: Callable[[float], float] = field(
        default=lambda x: float(np.clip(x, 0.0, 1.0)))
    model_kind: str = "location_scale"

    def __post_init__(self):
        if self.model_kind not in ("location_scale", "location"):
            raise ValueError(f"unknown model_kind {self.model_kind!r}")


def _expand_bracket(fn, x0=0.0, step=1.0):
    lo, hi = x0 - step, x0 + step
    for _ in range(200):
        if fn(lo) < 0 < fn(hi):
            return lo, hi
        lo -= step
        hi += step
        step *= 2
    raise RuntimeError("failed to bracket root")


def rescale_error_model(raw) -> Tuple[ErrorModel, Tuple[float, float]]:
    """Normalize: shift the tau-quantile to 0, then scale median|eps| to 1.

    Returns the model and the applied (shift, scale), i.e.
    eps = (eta - shift) * scale.
    """
    F_raw, f_raw, tau = raw.F_eps, raw.f_eps, raw.tau
    if not (0 < tau < 1):
        raise ValueError(f"tau must be in (0,1), got {tau}")
    lo, hi = _expand_bracket(lambda q: float(F_raw(q)) - tau)
    shift = brentq(lambda q: float(F_raw(q)) - tau, lo, hi, xtol=1e-14)

    def med_gap(m):
        return float(F_raw(shift + m) - F_raw(shift - m)) - 0.5

    m_hi = 1.0
    while med_gap(m_hi) < 0:
        m_hi *= 2
        if m_hi > 1e12:
            raise RuntimeError("failed to bracket the |eps| median")
    m = brentq(med_gap, 1e-14, m_hi, xtol=1e-14)
    scale = 1.0 / m

    def F_new(y):
        return F_raw(np.asarray(y) * m + shift)

    def f_new(y):
        return m * f_raw(np.asarray(y) * m + shift)

    sampler_new = None
    if getattr(raw, "sampler", None) is not None:
        raw_sampler = raw.sampler

        def sampler_new(rng, size):
            return (raw_sampler(rng, size) - shift) * scale

    model = ErrorModel(F_new, f_new, tau, getattr(raw, "family", "custom"),
                       sampler_new)
    return model, (shift, scale)


def normal_error_model(tau: float = 0.5, mu: float = 0.0,
                       sigma: float = 1.0) -> ErrorModel:
    def F(y):
        return ndtr((np.asarray(y, dtype=float) - mu) / sigma)

    def f(y):
        u = (np.asarray(y, dtype=float) - mu) / sigma
        return np.exp(-0.5 * u * u) / (sigma * np.sqrt(2 * np.pi))

    raw = _RawModel(F, f, tau, family=f"normal({mu},{sigma})",
                    sampler=lambda rng, size: mu + sigma * rng.standard_normal(size))
    return rescale_error_model(raw)[0]


def student_t_error_model(nu: float, tau: float = 0.5) -> ErrorModel:
    dist = student_t_dist(df=nu)
    raw = _RawModel(dist.cdf, dist.pdf, tau, family=f"student_t({nu})",
                    sampler=lambda rng, size: dist.rvs(size=size, random_state=rng))
    return rescale_error_model(raw)[0]


def _f_abs_one(em: ErrorModel) -> float:
    return float(em.f_eps(1.0) + em.f_eps(-1.0))


def phi(em: ErrorModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    f0 = float(em.f_eps(0.0))
    skew = float(em.f_eps(1.0) - em.f_eps(-1.0)) / _f_abs_one(em)
    return em.f_eps(y) / f0 * (1.0 - y * skew)


def psi(em: ErrorModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y * em.f_eps(y) / _f_abs_one(em)


def influence(em: ErrorModel, eps, y: float):
    """g(eps, y): the centered expansion term of the independence process."""
    eps = np.asarray(eps, dtype=float)
    g = ((eps <= y).astype(float) - float(em.F_eps(y))
         - float(phi(em, y)) * ((eps <= 0).astype(float) - em.tau)
         - float(psi(em, y)) * ((np.abs(eps) <= 1).astype(float) - 0.5))
    return g if g.shape else float(g)


def _phi_psi(spec: LimitCovarianceSpec):
    em = spec.error_model
    if spec.model_kind == "location":
        f0 = float(em.f_eps(0.0))
        return (lambda y: float(em.f_eps(y)) / f0), (lambda y: 0.0)
    return (lambda y: float(phi(em, y))), (lambda y: float(psi(em, y)))


def limit_covariance(spec: LimitCovarianceSpec, s: float, y: float,
                     t: float, z: float) -> float:
    """Cov(S(s,y), S(t,z)) of the limiting Gaussian field."""
    em = spec.error_model
    F, tau = em.F_eps, em.tau
    FX = spec.F_X
    cov_x = FX(min(s, t)) - FX(s) * FX(t)

    ph, ps = _phi_psi(spec)
    Fy, Fz = float(F(y)), float(F(z))
    py, pz = ph(y), ph(z)
    sy, sz = ps(y), ps(z)
    F0, Fm1 = float(F(0.0)), float(F(-1.0))

    ay = float(F(min(y, 0.0))) - Fy * tau
    az = float(F(min(z, 0.0))) - Fz * tau
    by = (float(F(min(y, 1.0))) - Fm1) * (y > -1.0) - 0.5 * Fy
    bz = (float(F(min(z, 1.0))) - Fm1) * (z > -1.0) - 0.5 * Fz
    # paired terms are grouped so the (s,y) <-> (t,z) swap is float-exact
    bracket = (
        (float(F(min(y, z))) - Fy * Fz)
        + py * pz * (tau - tau**2)
        + 0.25 * sy * sz
        - (py * az + pz * ay)
        - (sy * bz + sz * by)
        + (py * sz + pz * sy) * (F0 - Fm1 - 0.5 * tau)
    )
    return cov_x * bracket


def location_limit_covariance(spec: LimitCovarianceSpec, s: float, y: float,
                              t: float, z: float) -> float:
    """Separately coded location-model covariance (phi = f/f(0), psi = 0)."""
    em = spec.error_model
    F, tau = em.F_eps, em.tau
    FX = spec.F_X
    f0 = float(em.f_eps(0.0))
    py = float(em.f_eps(y)) / f0
    pz = float(em.f_eps(z)) / f0
    Fy, Fz = float(F(y)), float(F(z))
    bracket = (
        (float(F(min(y, z))) - Fy * Fz)
        + py * pz * (tau - tau**2)
        - (py * (float(F(min(z, 0.0))) - Fz * tau)
           + pz * (float(F(min(y, 0.0))) - Fy * tau))
    )
    return (FX(min(s, t)) - FX(s) * FX(t)) * bracket


def mc_expansion_covariance(spec: LimitCovarianceSpec,
                            quadruples: Sequence[Tuple[float, float, float, float]],
                            n: int, reps: int, seed: int,
                            chunk: int = 250):
    """Empirical covariance of the expansion process at given quadruples.

    Simulates X ~ U(0,1) and eps from the error model, builds
    S(t, y) = n^{-1/2} sum_i g(eps_i, y)(I{X_i <= t} - t) per replication,
    and returns a list of (empirical covariance, Monte-Carlo s.e.) pairs,
    one per (s, y, t, z) quadruple.
    """
    em = spec.error_model
    if em.sampler is None:
        raise ValueError("error model has no sampler")
    rng = np.random.default_rng(seed)
    nq = len(quadruples)
    A = np.empty((nq, reps))
    B = np.empty((nq, reps))
    done = 0
    while done < reps:
        c = min(chunk, reps - done)
        X = rng.uniform(size=(c, n))
        eps = em.sampler(rng, (c, n))
        for k, (s, y, t, z) in enumerate(quadruples):
            ga = influence(em, eps, y) * ((X <= s) - s)
            gb = influence(em, eps, z) * ((X <= t) - t)
            A[k, done:done + c] = ga.sum(axis=1) / np.sqrt(n)
            B[k, done:done + c] = gb.sum(axis=1) / np.sqrt(n)
        done += c
    out = []
    for k in range(nq):
        a = A[k] - A[k].mean()
        b = B[k] - B[k].mean()
        prod = a * b
        out.append((float(prod.mean()), float(prod.std(ddof=1) / np.sqrt(reps))))
    return out
