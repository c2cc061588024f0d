"""Kernel functions used by the smoothing stack.

Three kernels appear in the estimators and nowhere else:

* ``gaussian_K``        -- covariate weighting kernel K (unbounded support),
* ``epanechnikov_kappa``-- the inversion window kappa; only its CDF enters
                           the H functional,
* ``quartic4_omega``    -- order-4 response-smoothing kernel omega; its
                           antiderivative Omega smooths the conditional CDF.

Conventions
-----------
* All evaluators are vectorized and accept scalars or arrays; scalar input
  returns a plain float.
* Compact-support kernels are identically zero outside [-1, 1]; evaluation on
  the closed support uses the polynomial formula (the polynomials vanish at
  the endpoints, so there is no ambiguity for the densities themselves).
* omega is a *fourth-order* kernel: it takes negative values on
  sqrt(3/7) < |u| < 1 and consequently Omega is not monotone -- it undershoots
  0 near u = -1 (min ~-0.0611 at -sqrt(3/7)) and overshoots 1 near u = +1
  (max ~1.0611 at +sqrt(3/7); Omega(0.5) = 1.0283203125) before settling at
  0/1 outside the support.  Downstream code must not clip Omega inside the
  support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelSpec",
    "GAUSSIAN_K",
    "EPANECHNIKOV_KAPPA",
    "QUARTIC4_OMEGA",
    "kernel_from_name",
    "eval_kernel",
    "eval_Omega",
    "eval_kappa_cdf",
    "kernel_derivative",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class KernelSpec:
    """Identity card of a kernel.

    Parameters
    ----------
    kind : str
        One of ``gaussian_K``, ``epanechnikov_kappa``, ``quartic4_omega``.
    support : tuple or None
        Closed support ``(lo, hi)``; ``None`` means the whole real line.
    order : int
        Kernel order (first nonvanishing moment beyond the zeroth).
    """

    kind: str
    support: tuple | None
    order: int

    def __post_init__(self):
        if self.kind not in ("gaussian_K", "epanechnikov_kappa", "quartic4_omega"):
            raise ValueError(f"unknown kernel kind: {self.kind!r}")


GAUSSIAN_K = KernelSpec("gaussian_K", None, 2)
EPANECHNIKOV_KAPPA = KernelSpec("epanechnikov_kappa", (-1.0, 1.0), 2)
QUARTIC4_OMEGA = KernelSpec("quartic4_omega", (-1.0, 1.0), 4)

_BY_NAME = {
    "gaussian": GAUSSIAN_K,
    "epanechnikov": EPANECHNIKOV_KAPPA,
    "quartic4": QUARTIC4_OMEGA,
}


def kernel_from_name(name: str) -> KernelSpec:
    """Resolve a CLI-style kernel name ('gaussian', 'epanechnikov', 'quartic4')."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown kernel name: {name!r}") from None


def _ret(u_in, val):
    # scalar in -> float out, array in -> array out
    if np.ndim(u_in) == 0:
        return float(val)
    return val


def eval_kernel(spec: KernelSpec, u):
    """Evaluate the kernel density of `spec` at `u`."""
    x = np.asarray(u, dtype=float)
    if spec.kind == "gaussian_K":
        val = np.exp(-0.5 * x * x) / _SQRT_2PI
    elif spec.kind == "epanechnikov_kappa":
        val = np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)
    else:  # quartic4_omega
        x2 = x * x
        val = np.where(
            np.abs(x) <= 1.0,
            (15.0 / 32.0) * (3.0 - 10.0 * x2 + 7.0 * x2 * x2),
            0.0,
        )
    return _ret(u, val)


def eval_Omega(u):
    """Antiderivative of the order-4 kernel omega, normalized as a CDF-like map.

    Omega(u) = int_{-inf}^u omega(t) dt.  Equals 0 for u <= -1 and 1 for
    u >= 1, but is NOT monotone in between (omega changes sign); see module
    notes.  Values above 1 inside the support are correct and must be kept.
    """
    x = np.asarray(u, dtype=float)
    xc = np.clip(x, -1.0, 1.0)
    x2 = xc * xc
    val = 0.5 + (15.0 / 32.0) * xc * (3.0 - (10.0 / 3.0) * x2 + (7.0 / 5.0) * x2 * x2)
    # clamp the *saturated* regions only; the polynomial already hits 0/1 at +-1
    val = np.where(x <= -1.0, 0.0, np.where(x >= 1.0, 1.0, val))
    return _ret(u, val)


def eval_kappa_cdf(u):
    """CDF of the Epanechnikov kernel kappa: 0.75(u - u^3/3) + 0.5 on [-1, 1]."""
    x = np.asarray(u, dtype=float)
    xc = np.clip(x, -1.0, 1.0)
    val = 0.75 * (xc - xc * xc * xc / 3.0) + 0.5
    val = np.where(x <= -1.0, 0.0, np.where(x >= 1.0, 1.0, val))
    return _ret(u, val)


def kernel_derivative(spec: KernelSpec, m: int, u):
    """m-th derivative of the kernel density, m in {0, 1, 2}.

    Compact-support kernels are not differentiable at the support edges; the
    convention here is the interior formula on |u| < 1 and 0 on |u| >= 1.
    """
    if m not in (0, 1, 2):
        raise ValueError("derivative order m must be 0, 1 or 2")
    if m == 0:
        return eval_kernel(spec, u)
    x = np.asarray(u, dtype=float)
    if spec.kind == "gaussian_K":
        base = np.exp(-0.5 * x * x) / _SQRT_2PI
        val = -x * base if m == 1 else (x * x - 1.0) * base
    elif spec.kind == "epanechnikov_kappa":
        inside = np.abs(x) < 1.0
        val = np.where(inside, -1.5 * x, 0.0) if m == 1 else np.where(inside, -1.5, 0.0)
    else:  # quartic4_omega
        inside = np.abs(x) < 1.0
        if m == 1:
            val = np.where(inside, (15.0 / 32.0) * (-20.0 * x + 28.0 * x**3), 0.0)
        else:
            val = np.where(inside, (15.0 / 32.0) * (-20.0 + 84.0 * x * x), 0.0)
    return _ret(u, val)
