"""Structured errors shared across the estimation/testing pipeline."""


class QlsError(Exception):
    """Base class for all package-specific errors."""


class SingularDesign(QlsError):
    """Local polynomial design matrix is numerically singular.

    Raised when the weighted normal equations at an evaluation point have
    condition number above the configured threshold (duplicate covariates,
    absurd bandwidths).
    """


class DegenerateSample(QlsError):
    """Sample carries no usable spread (e.g. all values identical)."""


class ScaleDegenerate(QlsError):
    """Estimated scale curve is nonpositive at a grid node."""


class TrimEmpty(QlsError):
    """Trimming interval contains no observations."""


class BootstrapUnstable(QlsError):
    """Too many bootstrap replications failed to produce a statistic."""
