"""Increasing rearrangement of curves and constrained quantile curves.

For a function g on [a, b], the increasing rearrangement is

    Gamma(g)(x) = inf{ z : a + integral_a^b 1{g(t) <= z} dt >= x },

the nondecreasing function with the same value distribution as g.  On a
grid of equispaced nodes this is exactly a sort of the node values: the
grid measure is uniform, so the level-set integral counts nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantile_scale import Curve, QuantileCurve

__all__ = [
    "RearrangeConfig",
    "increasing_rearrangement",
    "constrained_quantile_curve",
]


@dataclass(frozen=True)
class RearrangeConfig:
    """Interval [a, b] and grid resolution for the discrete rearrangement."""

    a: float
    b: float
    grid_m: int = 2001

    def __post_init__(self):
        if not (self.a < self.b):
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if self.grid_m < 3:
            raise ValueError(f"grid_m must be >= 3, got {self.grid_m}")


def increasing_rearrangement(g: Curve, cfg: RearrangeConfig) -> Curve:
    """Sort the node values of g on cfg's grid (the discrete Gamma).

    Parameters
    ----------
    g : Curve
        Must be defined on [cfg.a, cfg.b].
    cfg : RearrangeConfig

    Returns
    -------
    Curve
        Nondecreasing curve on the same grid with the same value multiset.
    """
    grid = np.linspace(cfg.a, cfg.b, cfg.grid_m)
    vals = g.eval(grid)
    out = np.sort(vals, kind="stable")
    return Curve(grid, out, g.tau)


def constrained_quantile_curve(qhat: QuantileCurve, h: float, grid_m: int = 2001) -> QuantileCurve:
    """Rearranged quantile curve on [h, 1-h] (monotonicity-constrained q-hat)."""
    if not (0 < h < 0.5):
        raise ValueError(f"h must be in (0, 0.5), got {h}")
    if qhat.a > h or qhat.b < 1 - h:
        raise ValueError(
            f"curve domain [{qhat.a}, {qhat.b}] does not cover [{h}, {1 - h}]"
        )
    return increasing_rearrangement(qhat, RearrangeConfig(h, 1.0 - h, grid_m))
