"""Data-generating processes for the simulation studies and the Monte-Carlo
study driver.

Homoscedastic location models and their misspecifications::

    m1   Y = (x - 0.5 x^2) + sqrt(1 + a x)/10 * N(0,1)
    m2a  Y = (x - 0.5 x^2) + (1 - 1/(2c))^{1/2}/10 * t_c
    m2b  Y = (x - 0.5 x^2) + (1 - (cx)^{1/4})^{1/2}/10 * t_{2/(cx)^{1/4}}
    m3   Y = (x - 0.5 x^2) + (U - 0.5 - (b/6)(2x - 1)),  (X, U) ~ C(b)

Heteroscedastic (location-scale) variants m1h-m3h multiply the error by
(2 + x)/10 instead of 1/10; m3h uses the drift b(2x-1) without the 1/6
factor.  Monotonicity-study models::

    m4   Y = 1 + x - beta * exp(-50 (x - 0.5)^2) + 0.2 N(0,1)
    m5   Y = x/2 + 2 (0.1 - (x - 0.5)^2) N(0,1)

C(b) is sampled by the literal min/max construction: with X, V, W
independent U[0,1],

    U = min(V, W / (b(1 - 2X)))      if X <= 1/2
    U = max(V, 1 + W / (b(1 - 2X)))  otherwise,

which is the Farlie-Gumbel-Morgenstern copula when |b| <= 1 and is taken
literally for larger b.  Student-t variates use the inverse CDF so the
degrees of freedom may be non-integer (and vary with x in m2b).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import ndtri
from scipy.stats import t as student_t

from .bandwidths import pipeline_bandwidths
from .bootstrap import BootstrapConfig, bootstrap_test
from .cond_cdf import Sample
from .errors import (BootstrapUnstable, DegenerateSample, ScaleDegenerate,
                     SingularDesign, TrimEmpty)

__all__ = [
    "MODEL_IDS",
    "ModelSpec",
    "StudyResult",
    "model_spec",
    "generate",
    "true_quantile",
    "run_study",
]

# parameter each model requires (m5 takes none)
MODEL_IDS = {
    "m1": "a",
    "m2a": "c",
    "m2b": "c",
    "m3": "b",
    "m1h": "a",
    "m2ah": "c",
    "m2bh": "c",
    "m3h": "b",
    "m4": "beta",
    "m5": None,
}

_RUN_FAILURES = (SingularDesign, DegenerateSample, ScaleDegenerate,
                 TrimEmpty, BootstrapUnstable)


@dataclass(frozen=True)
class ModelSpec:
    id: str
    params: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.id not in MODEL_IDS:
            raise ValueError(f"unknown model id {self.id!r}")
        needed = MODEL_IDS[self.id]
        names = [k for k, _ in self.params]
        if needed is None:
            if names:
                raise ValueError(f"{self.id} takes no parameters, got {names}")
            return
        if names != [needed]:
            raise ValueError(f"{self.id} takes exactly one parameter "
                             f"{needed!r}, got {names}")
        value = self.params[0][1]
        if self.id in ("m1", "m1h") and not value > -1.0:
            raise ValueError("m1 needs a > -1 so 1 + a x stays positive")
        if self.id in ("m2a", "m2ah") and not value > 0.5:
            raise ValueError("m2a needs c > 1/2")
        if self.id in ("m2b", "m2bh") and not 0.0 < value <= 1.0:
            raise ValueError("m2b needs c in (0, 1] so cx <= 1 and the "
                             "degrees of freedom stay >= 2")

    def param(self) -> float:
        """The model's single parameter value (0.0 for m5)."""
        return self.params[0][1] if self.params else 0.0


def model_spec(model_id: str, **params: float) -> ModelSpec:
    """Convenience constructor: model_spec("m3", b=5.0)."""
    return ModelSpec(model_id, tuple(sorted(
        (k, float(v)) for k, v in params.items())))


@dataclass(frozen=True)
class StudyResult:
    model: ModelSpec
    test_kind: str
    n: int
    runs: int
    B: int
    tau: float
    level: float
    reject_rate_ks: float
    reject_rate_cvm: float
    failures: int
    root_seed: int

    def to_row(self) -> dict:
        """Flat dict for CSV emission."""
        return {
            "model": self.model.id,
            "param": self.model.param(),
            "test_kind": self.test_kind,
            "n": self.n,
            "runs": self.runs,
            "B": self.B,
            "tau": self.tau,
            "level": self.level,
            "reject_rate_ks": self.reject_rate_ks,
            "reject_rate_cvm": self.reject_rate_cvm,
            "failures": self.failures,
            "root_seed": self.root_seed,
        }


# ---------------------------------------------------------------------------
# generators


def _fgm_u(x: np.ndarray, b: float, rng: np.random.Generator) -> np.ndarray:
    """U from the C(b) construction, componentwise over x."""
    n = len(x)
    v = rng.uniform(size=n)
    w = rng.uniform(size=n)
    if b == 0.0:
        return v  # divisor b(1-2X) is identically 0: U = V
    denom = b * (1.0 - 2.0 * x)
    with np.errstate(divide="ignore"):
        ratio = np.where(denom != 0.0, w / denom, np.inf)
    # X = 1/2 exactly has divisor 0; the continuous limit is U = V, which
    # min(V, +inf) on the x <= 1/2 branch produces
    return np.where(x <= 0.5, np.minimum(v, ratio), np.maximum(v, 1.0 + ratio))


def _student_t_draws(df, rng: np.random.Generator, n: int) -> np.ndarray:
    """Inverse-CDF t draws; df may be an array (varying with x)."""
    u = rng.uniform(size=n)
    return student_t.ppf(u, df)


def _m2b_noise(x: np.ndarray, c: float, rng: np.random.Generator) -> np.ndarray:
    root = (c * x) ** 0.25
    with np.errstate(divide="ignore"):
        df = np.where(root > 0.0, 2.0 / root, np.inf)
    if not np.all(df >= 2.0):
        raise ValueError("m2b degrees of freedom below 2; need cx <= 1")
    return np.sqrt(1.0 - root) * _student_t_draws(df, rng, len(x))


def generate(model: ModelSpec, n: int, rng: np.random.Generator) -> Sample:
    """n i.i.d. draws from the model; X ~ U[0,1] throughout."""
    if n < 1:
        raise ValueError("n must be at least 1")
    x = rng.uniform(size=n)
    center = x - 0.5 * x**2
    mid, p = model.id, model.param()

    if mid in ("m1", "m1h"):
        noise = np.sqrt(1.0 + p * x) * rng.standard_normal(n)
    elif mid in ("m2a", "m2ah"):
        noise = np.sqrt(1.0 - 1.0 / (2.0 * p)) * _student_t_draws(p, rng, n)
    elif mid in ("m2b", "m2bh"):
        noise = _m2b_noise(x, p, rng)
    elif mid in ("m3", "m3h"):
        u = _fgm_u(x, p, rng)
        drift = p * (2.0 * x - 1.0)
        if mid == "m3":
            # the copula error enters unscaled here; only m3h has (2+x)/10
            return Sample(x, center + (u - 0.5 - drift / 6.0))
        noise = u - 0.5 - drift
    elif mid == "m4":
        y = 1.0 + x - p * np.exp(-50.0 * (x - 0.5) ** 2) \
            + 0.2 * rng.standard_normal(n)
        return Sample(x, y)
    else:  # m5
        y = x / 2.0 + 2.0 * (0.1 - (x - 0.5) ** 2) * rng.standard_normal(n)
        return Sample(x, y)

    scale = (2.0 + x) / 10.0 if mid.endswith("h") else 0.1
    return Sample(x, center + scale * noise)


def true_quantile(model: ModelSpec, tau: float, x) -> np.ndarray:
    """Ground-truth conditional quantile curve (monotonicity models only)."""
    if model.id not in ("m4", "m5"):
        raise ValueError(f"no closed-form quantile for {model.id!r}")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must be in (0, 1)")
    x = np.asarray(x, dtype=float)
    z = ndtri(tau)
    if model.id == "m4":
        return 1.0 + x - model.param() * np.exp(-50.0 * (x - 0.5) ** 2) + 0.2 * z
    return x / 2.0 + 2.0 * (0.1 - (x - 0.5) ** 2) * z


# ---------------------------------------------------------------------------
# study driver


def _run_one(args):
    (model, n, B, tau, level, test_kind, root_seed, idx) = args
    data_ss, boot_ss = np.random.SeedSequence((root_seed, idx)).spawn(2)
    rng = np.random.default_rng(data_ss)
    sample = generate(model, n, rng)
    boot_seed = int(boot_ss.generate_state(1, np.uint64)[0])
    try:
        bw = pipeline_bandwidths(sample, test_kind)
        report = bootstrap_test(sample, tau, bw,
                                BootstrapConfig(B=B, level=level,
                                                seed=boot_seed),
                                test_kind)
    except _RUN_FAILURES:
        return idx, None, None
    return idx, report.reject_ks, report.reject_cvm


def run_study(model: ModelSpec, n: int, runs: int, B: int, tau: float,
              level: float, test_kind: str, root_seed: int,
              workers: int = 1) -> StudyResult:
    """Monte-Carlo rejection rates: generate -> bandwidths -> bootstrap_test.

    Each run draws its data and bootstrap seeds from SeedSequence((root_seed,
    run_index)), so any single run can be reproduced in isolation and the
    result is a pure function of the arguments regardless of worker count.
    Failed runs (degenerate fits, unstable bootstraps) are excluded from the
    rate denominators and counted.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    tasks = [(model, n, B, tau, level, test_kind, root_seed, i)
             for i in range(runs)]
    if workers == 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, tasks, chunksize=8))
    results.sort(key=lambda r: r[0])
    ks = [r[1] for r in results if r[1] is not None]
    cvm = [r[2] for r in results if r[2] is not None]
    failures = runs - len(ks)
    ok = max(len(ks), 1)
    return StudyResult(
        model=model, test_kind=test_kind, n=n, runs=runs, B=B, tau=tau,
        level=level,
        reject_rate_ks=sum(ks) / ok,
        reject_rate_cvm=sum(cvm) / ok,
        failures=failures,
        root_seed=root_seed,
    )
