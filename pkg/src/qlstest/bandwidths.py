"""Bandwidth rules: Rice difference variance, the n^{-1/7} formulas, and the
bootstrap smoothing level alpha_n.

The raw rules are
    d = 2 (sigma2/n)^{1/7},  h = (sigma2/n)^{1/7},  b = sigma2 * n^{-2/7},
    alpha = 0.1 n^{-1/4} sqrt(2) median|residuals|.

At small n the raw h lands far above 1/4, which would empty the trimming
windows (2h, 1-2h] the tests live on if the trim margin were tied to h.  The
margin is therefore a separate field `t` (defaulting to h): smoothing keeps
the literal h while `pipeline_bandwidths` sets a per-test margin, so boundary
exclusion stays a thin strip no matter how wide the smoother is.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .cond_cdf import Sample
from .kernels import GAUSSIAN_K, KernelSpec

__all__ = [
    "BandwidthSet",
    "BandwidthWarning",
    "TRIM_MARGINS",
    "H_SCALES",
    "rice_variance",
    "default_bandwidths",
    "bootstrap_alpha",
    "pipeline_bandwidths",
]


class BandwidthWarning(UserWarning):
    """Signals bandwidths outside the range the trimming workflow can use."""


@dataclass(frozen=True)
class BandwidthSet:
    h: float          # covariate bandwidth
    d: float          # response smoothing bandwidth
    b: float          # inversion bandwidth
    alpha: float = 0.0  # bootstrap smoothing (filled once residuals exist)
    p: int = 3        # local polynomial order
    t: float | None = None  # trim margin (None: tied to h)
    kernel: KernelSpec = GAUSSIAN_K  # covariate kernel for the local fits

    def __post_init__(self):
        if not (self.h > 0 and self.d > 0 and self.b > 0):
            raise ValueError("h, d, b must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.t is not None and not 0 < self.t:
            raise ValueError("trim margin t must be positive")

    @property
    def trim(self) -> float:
        """Boundary margin: curve grids live on [t, 1-t]; both the data and
        the bootstrap statistic restrict to covariates in (2t, 1-2t]."""
        return self.h if self.t is None else self.t

    def with_alpha(self, alpha: float) -> "BandwidthSet":
        return replace(self, alpha=float(alpha))


def rice_variance(sample: Sample) -> float:
    """First-difference variance estimate along the covariate ordering.

    Pairs are sorted by (x, y, original index) so ties cannot make the result
    run-dependent; returns sum of squared successive response differences over
    2(n-1).
    """
    order = np.lexsort((np.arange(sample.n), sample.y, sample.x))
    ys = sample.y[order]
    diffs = np.diff(ys)
    return float(np.sum(diffs * diffs) / (2.0 * (sample.n - 1)))


def default_bandwidths(n: int, sigma2: float) -> BandwidthSet:
    """The literal n^{-1/7} rules; p defaults to 3, alpha left at 0."""
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    h = (sigma2 / n) ** (1.0 / 7.0)
    d = 2.0 * h
    b = sigma2 * n ** (-2.0 / 7.0)
    if h >= 0.25:
        warnings.warn(
            f"h={h:.4g} >= 1/4: an h-tied trim margin empties (2h, 1-2h]; "
            "set a capped margin t (see pipeline_bandwidths) before testing",
            BandwidthWarning,
            stacklevel=2,
        )
    return BandwidthSet(h=h, d=d, b=b)


def _lower_median(values: np.ndarray) -> float:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empty array has no median")
    return float(v[(v.size - 1) // 2])


def bootstrap_alpha(residuals, n: int) -> float:
    """Smoothing level for the residual bootstrap: 0.1 n^{-1/4} sqrt(2) med|eps|.

    Median is the lower median for even counts.
    """
    r = np.abs(np.asarray(residuals, dtype=float).ravel())
    if r.size == 0:
        raise ValueError("need at least one residual")
    return float(0.1 * n ** (-0.25) * np.sqrt(2.0) * _lower_median(r))


# Trim margin per test kind.  The covariate-residual tests keep the excluded
# strip thin because independence violations tend to concentrate where the
# quantile fit is one-sided; the monotonicity test needs a wider berth because
# a scale function dipping through zero near the boundary makes standardized
# residuals explode there.
TRIM_MARGINS = {
    "location": 0.03,
    "location_scale": 0.03,
    "monotone": 0.10,
}

# Covariate bandwidth inflation per test kind.  With p=2 the fit reproduces
# polynomial trends up to quadratics exactly at any h, so a wide window costs
# the covariate-residual tests nothing under smooth nulls while averaging
# away more of a misspecified trend into the residuals, where the tests can
# see it.  The monotonicity test keeps the formula value: rearrangement
# propagates one-sided boundary wiggles into the interior, and at low noise
# (small formula h) an inflated window visibly distorts its level.
H_SCALES = {
    "location": 1.5,
    "location_scale": 1.5,
    "monotone": 1.0,
}


def pipeline_bandwidths(
    sample: Sample,
    test_kind: str = "location",
    *,
    t: float | None = None,
    p: int = 2,
) -> BandwidthSet:
    """Bandwidths as the testing pipeline uses them: the formula smoothing
    rules with the covariate window widened per test kind, a per-test trim
    margin, and local-quadratic fits.

    The d and b bandwidths stay at their formula values; h is inflated by
    H_SCALES[test_kind] and the boundary exclusion decoupled from it, since
    an h-tied margin would empty the trim windows at small n.  The margin is
    min(h, per-kind constant) so it still shrinks with n once h drops below
    the constant.  Pass `t` to override the margin, `p` to override the fit
    order (2 reproduces every polynomial trend up to quadratics exactly,
    which keeps size clean while leaving more of a misspecified trend in the
    residuals than higher orders would).
    """
    if test_kind not in TRIM_MARGINS:
        raise ValueError(f"unknown test kind: {test_kind!r}")
    sigma2 = rice_variance(sample)
    if sigma2 <= 0.0:
        raise ValueError("degenerate sample: zero difference variance")
    n = sample.n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BandwidthWarning)
        bw = default_bandwidths(n, sigma2)
    h = H_SCALES[test_kind] * bw.h
    margin = TRIM_MARGINS[test_kind] if t is None else t
    return replace(bw, h=h, t=min(h, margin), p=p)
