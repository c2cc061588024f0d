"""Nonparametric quantile/scale estimation with bootstrap specification tests.

Public surface is re-exported from the submodules; see the README for the
estimation pipeline and the command line interface.
"""

__version__ = "0.1.0"

from .errors import (
    BootstrapUnstable,
    DegenerateSample,
    QlsError,
    ScaleDegenerate,
    SingularDesign,
    TrimEmpty,
)

__all__ = [
    "QlsError",
    "SingularDesign",
    "DegenerateSample",
    "ScaleDegenerate",
    "TrimEmpty",
    "BootstrapUnstable",
    "__version__",
]
