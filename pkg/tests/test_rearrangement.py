import numpy as np
import pytest

from qlstest.quantile_scale import Curve, QuantileCurve
from qlstest.rearrangement import (
    RearrangeConfig,
    constrained_quantile_curve,
    increasing_rearrangement,
)


def _gamma_bisect_oracle(curve, cfg, n_fine=200_001, iters=60):
    """Gamma(g)(x) = inf{z : a + int_a^b 1{g<=z} dt >= x}, the integral by a
    fine midpoint rule and the inf by bisection in value space."""
    a, b = cfg.a, cfg.b
    t_fine = a + (b - a) * (np.arange(n_fine) + 0.5) / n_fine
    g_sorted = np.sort(curve.eval(t_fine))

    def measure(z):
        # a + (b-a) * (1/n) #{g(t_k) <= z}
        return a + (b - a) * np.searchsorted(g_sorted, z, side="right") / n_fine

    grid = np.linspace(a, b, cfg.grid_m)
    lo = np.full(cfg.grid_m, g_sorted[0] - 1e-9)
    hi = np.full(cfg.grid_m, g_sorted[-1])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = measure(mid) >= grid
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return hi


class TestIncreasingRearrangement:
    def test_monotone_input_identity(self):
        grid = np.linspace(0.1, 0.9, 81)
        g = Curve(grid, np.exp(grid), 0.5)
        out = increasing_rearrangement(g, RearrangeConfig(0.1, 0.9, 81))
        np.testing.assert_array_equal(out.values, g.values)
        np.testing.assert_array_equal(out.grid_x, g.grid_x)

    def test_decreasing_line(self):
        m = 501
        grid = np.linspace(0.0, 1.0, m)
        g = Curve(grid, -grid, 0.5)
        out = increasing_rearrangement(g, RearrangeConfig(0.0, 1.0, m))
        assert np.max(np.abs(out.values - (out.grid_x - 1.0))) <= 1.0 / (m - 1)

    def test_bump_curve_against_bisection_oracle(self):
        # median curve 1 + x - 0.45 exp(-50 (x-1/2)^2): unimodal dip, the
        # rearrangement flattens the non-monotone stretch
        base = np.linspace(0.05, 0.95, 1201)
        vals = 1.0 + base - 0.45 * np.exp(-50.0 * (base - 0.5) ** 2)
        g = Curve(base, vals, 0.5)
        cfg = RearrangeConfig(0.1, 0.9, 2001)
        out = increasing_rearrangement(g, cfg)
        oracle = _gamma_bisect_oracle(g, cfg)
        assert np.all(np.diff(out.values) >= 0)
        assert np.max(np.abs(out.values - oracle)) <= 2.0 / cfg.grid_m

    def test_random_smooth_curves_against_oracle(self):
        rng = np.random.default_rng(19)
        base = np.linspace(0.0, 1.0, 801)
        for _ in range(20):
            c = rng.normal(size=4)
            vals = (c[0] + c[1] * np.sin(2 * np.pi * base + c[2])
                    + c[3] * (base - 0.5) ** 2)
            g = Curve(base, vals, 0.5)
            cfg = RearrangeConfig(0.0, 1.0, 501)
            out = increasing_rearrangement(g, cfg)
            oracle = _gamma_bisect_oracle(g, cfg, n_fine=100_001)
            tol = 2.0 * np.ptp(vals) / cfg.grid_m
            assert np.max(np.abs(out.values - oracle)) <= tol

    def test_value_multiset_preserved(self):
        rng = np.random.default_rng(3)
        grid = np.linspace(0.2, 0.8, 61)
        g = Curve(grid, rng.standard_normal(61), 0.5)
        out = increasing_rearrangement(g, RearrangeConfig(0.2, 0.8, 61))
        np.testing.assert_array_equal(np.sort(g.values), out.values)

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        grid = np.linspace(0.1, 0.9, 101)
        g = Curve(grid, rng.standard_normal(101), 0.5)
        cfg = RearrangeConfig(0.1, 0.9, 101)
        once = increasing_rearrangement(g, cfg)
        twice = increasing_rearrangement(once, cfg)
        np.testing.assert_array_equal(once.values, twice.values)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RearrangeConfig(0.5, 0.5)
        with pytest.raises(ValueError):
            RearrangeConfig(0.1, 0.9, grid_m=2)


class TestConstrainedQuantileCurve:
    def test_increasing_curve_unchanged(self):
        grid = np.linspace(0.05, 0.95, 301)
        q = QuantileCurve(grid, 1.0 + grid**2, 0.5)
        out = constrained_quantile_curve(q, 0.1, grid_m=301)
        assert np.all(np.diff(out.values) >= 0)
        np.testing.assert_allclose(out.values, q.eval(out.grid_x), atol=0)

    def test_default_resolution_and_domain(self):
        grid = np.linspace(0.05, 0.95, 301)
        q = QuantileCurve(grid, np.cos(4 * grid), 0.5)
        out = constrained_quantile_curve(q, 0.05)
        assert out.grid_x.size == 2001
        assert out.a == 0.05 and out.b == 0.95
        assert out.tau == q.tau
        assert np.all(np.diff(out.values) >= 0)

    def test_coverage_required(self):
        q = QuantileCurve(np.linspace(0.2, 0.8, 11), np.linspace(0, 1, 11), 0.5)
        with pytest.raises(ValueError):
            constrained_quantile_curve(q, 0.1)
        with pytest.raises(ValueError):
            constrained_quantile_curve(q, 0.6)
