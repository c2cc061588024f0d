import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlstest.bandwidths import (
    BandwidthSet,
    BandwidthWarning,
    bootstrap_alpha,
    default_bandwidths,
    pipeline_bandwidths,
    rice_variance,
)
from qlstest.cond_cdf import Sample


def test_rice_constant_y():
    s = Sample(np.linspace(0, 1, 20), np.full(20, 3.7))
    assert rice_variance(s) == 0.0


def test_rice_alternating():
    n, c = 40, 0.6
    x = np.linspace(0, 1, n)
    y = c * (-1.0) ** np.arange(n)
    assert rice_variance(Sample(x, y)) == pytest.approx(2 * c * c, rel=1e-12)


def test_rice_sorts_by_x_not_input_order():
    rng = np.random.default_rng(7)
    x = rng.uniform(size=30)
    y = np.sin(6 * x) + 0.01 * rng.standard_normal(30)
    perm = rng.permutation(30)
    assert rice_variance(Sample(x, y)) == pytest.approx(
        rice_variance(Sample(x[perm], y[perm])), rel=1e-12
    )


def test_rice_noise_level_recovery():
    # Y = m(x) + 0.1 N: sigma^2 = 0.01, Rice estimate should sit near it
    vals = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.uniform(size=1000)
        y = (x - 0.5 * x**2) + 0.1 * rng.standard_normal(1000)
        vals.append(rice_variance(Sample(x, y)))
    assert 0.008 <= np.median(vals) <= 0.012


def test_rice_homogeneity():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=50)
    y = rng.standard_normal(50)
    base = rice_variance(Sample(x, y))
    assert rice_variance(Sample(x, 2.5 * y)) == pytest.approx(2.5**2 * base, rel=1e-12)


class TestDefaultBandwidths:
    def test_unit_arguments(self):
        with pytest.warns(BandwidthWarning):
            bw = default_bandwidths(1, 1.0)
        assert (bw.h, bw.d, bw.b) == (1.0, 2.0, 1.0)

    def test_d_is_twice_h(self):
        for n, s2 in [(50, 0.01), (400, 0.2), (1000, 1.3)]:
            bw = default_bandwidths(n, s2)
            assert bw.d == pytest.approx(2 * bw.h, rel=1e-15)

    def test_formula_values(self):
        with pytest.warns(BandwidthWarning):
            bw = default_bandwidths(100, 0.04)
        assert bw.h == pytest.approx((0.04 / 100) ** (1 / 7), rel=1e-14)
        assert bw.h == pytest.approx(0.327, abs=1e-3)
        assert bw.d == pytest.approx(0.6536, abs=2e-3)
        assert bw.b == pytest.approx(0.010731, abs=1e-6)
        assert bw.p == 3

    def test_monotone_decay_in_n(self):
        h1 = default_bandwidths(200, 0.01).h
        h2 = default_bandwidths(800, 0.01).h
        assert h2 < h1

    def test_rejects_bad_sigma2(self):
        with pytest.raises(ValueError):
            default_bandwidths(100, 0.0)
        with pytest.raises(ValueError):
            default_bandwidths(100, -1.0)


class TestBootstrapAlpha:
    def test_zero_residuals(self):
        assert bootstrap_alpha(np.zeros(8), 8) == 0.0

    def test_two_point_closed_form(self):
        assert bootstrap_alpha(np.array([-1.0, 1.0]), 16) == pytest.approx(
            0.05 * np.sqrt(2.0), rel=1e-12
        )

    def test_lower_median_convention(self):
        # |residuals| = {1, 2, 3, 4}: lower median is 2 (not 2.5)
        a = bootstrap_alpha(np.array([1.0, -2.0, 3.0, -4.0]), 16)
        assert a == pytest.approx(0.1 * 16**-0.25 * np.sqrt(2) * 2.0, rel=1e-12)

    @given(st.floats(0.1, 50.0))
    def test_homogeneous_in_scale(self, c):
        r = np.array([0.3, -0.7, 1.1, 0.2, -0.05])
        assert bootstrap_alpha(c * r, 25) == pytest.approx(
            c * bootstrap_alpha(r, 25), rel=1e-10
        )


def test_bandwidthset_validation():
    with pytest.raises(ValueError):
        BandwidthSet(h=0.0, d=0.1, b=0.01)
    with pytest.raises(ValueError):
        BandwidthSet(h=0.1, d=0.2, b=0.01, alpha=-0.5)
    bw = BandwidthSet(h=0.1, d=0.2, b=0.01).with_alpha(0.02)
    assert bw.alpha == 0.02


def test_pipeline_margins():
    rng = np.random.default_rng(11)
    x = rng.uniform(size=100)
    y = (x - 0.5 * x**2) + 0.1 * rng.standard_normal(100)
    s = Sample(x, y)
    s2 = rice_variance(s)

    bw = pipeline_bandwidths(s)
    # covariate window widened per kind; d and b keep the formula values
    h_formula = (s2 / 100) ** (1 / 7)
    assert bw.h == pytest.approx(1.5 * h_formula, rel=1e-12)
    assert bw.d == pytest.approx(2 * h_formula, rel=1e-12)
    assert bw.b == pytest.approx(s2 * 100 ** (-2 / 7), rel=1e-12)
    # the margin is decoupled and per test kind
    assert bw.trim == 0.03
    assert pipeline_bandwidths(s, "location_scale").trim == 0.03
    mono = pipeline_bandwidths(s, "monotone")
    assert mono.trim == 0.10
    # the monotonicity pipeline keeps the formula window
    assert mono.h == pytest.approx(h_formula, rel=1e-12)
    assert bw.p == 2
    # explicit override wins
    assert pipeline_bandwidths(s, t=0.02, p=3).trim == 0.02
    with pytest.raises(ValueError):
        pipeline_bandwidths(s, "spurious-kind")

    # large-n case: the inflated h drops below the constant and takes over
    x2 = rng.uniform(size=200_000)
    y2 = 0.0001 * rng.standard_normal(200_000)
    bw2 = pipeline_bandwidths(Sample(x2, y2))
    assert bw2.trim == bw2.h < 0.03
