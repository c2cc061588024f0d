import numpy as np
import pytest

from qlstest.cond_cdf import (
    CondCdfEstimate,
    LocalPolyConfig,
    Sample,
    abs_residual_cdf,
    cond_cdf_eval,
    local_poly_weight_matrix,
    local_poly_weights,
)
from qlstest.errors import SingularDesign
from qlstest.kernels import GAUSSIAN_K, eval_Omega, eval_kernel


def _uniform_design(n=50):
    return np.linspace(0.0, 1.0, n)


class TestWeights:
    def test_direct_solve_oracle(self):
        # independent oracle: unscaled design, explicit (X'WX)^{-1}X'W first row
        xs = _uniform_design(50)
        x0, h, p = 0.5, 0.2, 3
        cfg = LocalPolyConfig(h=h, d=0.1, p=p)
        w = local_poly_weights(x0, xs, cfg)

        dx = xs - x0
        V = np.vander(dx, p + 1, increasing=True)
        K = eval_kernel(GAUSSIAN_K, dx / h)
        A = V.T @ (K[:, None] * V)
        ref = np.linalg.solve(A, V.T @ np.diag(K))[0]
        np.testing.assert_allclose(w, ref, atol=1e-10)

    def test_p0_reduces_to_nadaraya_watson(self):
        xs = _uniform_design(30)
        cfg = LocalPolyConfig(h=0.15, d=0.1, p=0)
        w = local_poly_weights(0.4, xs, cfg)
        k = eval_kernel(GAUSSIAN_K, (xs - 0.4) / 0.15)
        np.testing.assert_allclose(w, k / k.sum(), atol=1e-14)

    @pytest.mark.parametrize("x0", [0.05, 0.3, 0.5, 0.77, 0.95])
    def test_reproduces_constants(self, x0):
        xs = np.random.default_rng(0).uniform(size=80)
        w = local_poly_weights(x0, xs, LocalPolyConfig(h=0.07, d=0.05))
        assert abs(w.sum() - 1.0) < 1e-10

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_moment_annihilation(self, k):
        xs = np.random.default_rng(1).uniform(size=120)
        for x0 in (0.2, 0.5, 0.9):
            w = local_poly_weights(x0, xs, LocalPolyConfig(h=0.08, d=0.05))
            assert abs(np.dot(w, (xs - x0) ** k)) < 1e-8

    def test_translation_equivariance(self):
        xs = np.random.default_rng(2).uniform(0.0, 0.6, size=60)
        cfg = LocalPolyConfig(h=0.1, d=0.05)
        w0 = local_poly_weight_matrix(np.array([0.3]), xs, cfg)
        w1 = local_poly_weight_matrix(np.array([0.7]), xs + 0.4, cfg)
        np.testing.assert_allclose(w0, w1, atol=1e-12)

    def test_batch_matches_single(self):
        xs = np.random.default_rng(3).uniform(size=40)
        cfg = LocalPolyConfig(h=0.12, d=0.05)
        grid = np.array([0.25, 0.5, 0.75])
        W = local_poly_weight_matrix(grid, xs, cfg)
        for r, x0 in enumerate(grid):
            np.testing.assert_allclose(W[r], local_poly_weights(x0, xs, cfg), atol=0)

    def test_duplicate_covariates_raise(self):
        xs = np.full(20, 0.5)
        with pytest.raises(SingularDesign):
            local_poly_weights(0.5, xs, LocalPolyConfig(h=0.1, d=0.1))

    def test_too_few_points_raise(self):
        with pytest.raises(SingularDesign):
            local_poly_weights(0.5, np.array([0.1, 0.5, 0.9]), LocalPolyConfig(h=0.1, d=0.1))

    def test_negative_weights_possible(self):
        # cubic fits produce negative weights in the tails; they must be kept
        xs = _uniform_design(60)
        w = local_poly_weights(0.5, xs, LocalPolyConfig(h=0.15, d=0.1))
        assert w.min() < 0.0


class TestCondCdf:
    def _est(self, mode="smoothed_Omega", n=60, seed=5):
        rng = np.random.default_rng(seed)
        x = rng.uniform(size=n)
        y = np.sin(3 * x) + 0.2 * rng.standard_normal(n)
        return CondCdfEstimate(Sample(x, y), LocalPolyConfig(h=0.15, d=0.1), mode)

    def test_saturates_exactly(self):
        est = self._est()
        ymax, ymin = est.sample.y.max(), est.sample.y.min()
        assert cond_cdf_eval(est, 0.5, ymax + est.config.d) == 1.0
        assert cond_cdf_eval(est, 0.5, ymax + 5.0) == 1.0
        assert cond_cdf_eval(est, 0.5, ymin - est.config.d) == 0.0

    def test_indicator_saturation(self):
        est = self._est(mode="indicator")
        assert cond_cdf_eval(est, 0.3, est.sample.y.max()) == 1.0
        assert cond_cdf_eval(est, 0.3, est.sample.y.min() - 1e-9) == 0.0

    def test_constant_response_centers_at_half(self):
        x = _uniform_design(40)
        est = CondCdfEstimate(Sample(x, np.full(40, 2.0)), LocalPolyConfig(h=0.2, d=0.1))
        assert cond_cdf_eval(est, 0.5, 2.0) == pytest.approx(0.5, abs=1e-12)

    def test_vector_y_matches_scalar(self):
        est = self._est()
        ys = np.array([-0.5, 0.1, 0.4, 1.2])
        vec = cond_cdf_eval(est, 0.6, ys)
        for v, yy in zip(vec, ys):
            assert v == cond_cdf_eval(est, 0.6, float(yy))

    def test_smoothed_vs_indicator_bound(self):
        est_s = self._est()
        est_i = CondCdfEstimate(est_s.sample, est_s.config, "indicator")
        w = local_poly_weights(0.5, est_s.sample.x, est_s.config)
        ys = np.linspace(est_s.sample.y.min() - 0.3, est_s.sample.y.max() + 0.3, 200)
        fs = cond_cdf_eval(est_s, 0.5, ys)
        fi = cond_cdf_eval(est_i, 0.5, ys)
        omega_terms = eval_Omega((ys[:, None] - est_s.sample.y[None, :]) / est_s.config.d)
        ind_terms = (est_s.sample.y[None, :] <= ys[:, None]).astype(float)
        bound = np.abs(omega_terms - ind_terms) @ np.abs(w)
        assert np.all(np.abs(fs - fi) <= bound + 1e-12)

    def test_invalid_mode_rejected(self):
        with pytest.raises(ValueError):
            CondCdfEstimate(self._est().sample, LocalPolyConfig(h=0.1, d=0.1), "parzen")

    def test_abs_residual_cdf_counts(self):
        rng = np.random.default_rng(9)
        xs = rng.uniform(size=50)
        abs_e = np.abs(rng.standard_normal(50))
        cfg = LocalPolyConfig(h=0.2, d=0.1)
        v = abs_residual_cdf(xs, abs_e, cfg, 0.5, abs_e.max())
        assert v == 1.0
        mid = abs_residual_cdf(xs, abs_e, cfg, 0.5, np.median(abs_e))
        assert 0.2 < mid < 0.8


class TestSampleValidation:
    def test_rejects_out_of_range_x(self):
        with pytest.raises(ValueError):
            Sample(np.array([0.1, 1.2]), np.array([0.0, 0.0]))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Sample(np.array([0.1, 0.2]), np.array([np.nan, 0.0]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Sample(np.array([0.1, 0.2]), np.array([0.0]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LocalPolyConfig(h=-0.1, d=0.1)
        with pytest.raises(ValueError):
            LocalPolyConfig(h=0.1, d=0.0)
        with pytest.raises(ValueError):
            LocalPolyConfig(h=0.1, d=0.1, p=-1)
