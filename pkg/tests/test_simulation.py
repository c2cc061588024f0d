import numpy as np
import pytest
from scipy.stats import chi2_contingency

import qlstest.simulation as sim
from qlstest.errors import TrimEmpty
from qlstest.simulation import (ModelSpec, StudyResult, generate, model_spec,
                                run_study, true_quantile)


class TestModelSpec:
    def test_constructor_and_param(self):
        m = model_spec("m3", b=5)
        assert m.id == "m3" and m.param() == 5.0
        assert model_spec("m5").param() == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            model_spec("m99", a=1)
        with pytest.raises(ValueError):
            model_spec("m3")  # missing parameter
        with pytest.raises(ValueError):
            model_spec("m3", a=1)  # wrong name
        with pytest.raises(ValueError):
            model_spec("m5", beta=0.2)  # m5 takes none
        with pytest.raises(ValueError):
            model_spec("m1", a=-1.0)
        with pytest.raises(ValueError):
            model_spec("m2a", c=0.5)
        with pytest.raises(ValueError):
            model_spec("m2b", c=1.5)
        with pytest.raises(ValueError):
            model_spec("m2bh", c=0.0)


class TestGenerate:
    def test_m3_b0_uniform_errors(self):
        rng = np.random.default_rng(0)
        s = generate(model_spec("m3", b=0), 50_000, rng)
        eps = s.y - (s.x - 0.5 * s.x**2)
        assert np.all(eps >= -0.5) and np.all(eps <= 0.5)
        # uniform on [-0.5, 0.5]: EDF close to linear
        grid = np.linspace(-0.5, 0.5, 101)
        edf = np.searchsorted(np.sort(eps), grid, side="right") / len(eps)
        assert np.max(np.abs(edf - (grid + 0.5))) < 0.01

    def test_m1_a0_moments(self):
        rng = np.random.default_rng(1)
        n = 100_000
        s = generate(model_spec("m1", a=0), n, rng)
        eps = s.y - (s.x - 0.5 * s.x**2)
        assert abs(np.mean(eps)) < 3 * 0.1 / np.sqrt(n)
        sd = np.std(eps)
        assert abs(sd - 0.1) < 3 * 0.1 / np.sqrt(2 * (n - 1))

    def test_m4_binned_medians(self):
        rng = np.random.default_rng(2)
        n = 100_000
        beta = 0.45
        s = generate(model_spec("m4", beta=beta), n, rng)
        resid = s.y - true_quantile(model_spec("m4", beta=beta), 0.5, s.x)
        for lo in np.arange(0.0, 1.0, 0.1):
            sel = (s.x >= lo) & (s.x < lo + 0.1)
            m = sel.sum()
            # median MC s.e. ~ 1.2533 * sigma / sqrt(m)
            assert abs(np.median(resid[sel])) < 4 * 1.2533 * 0.2 / np.sqrt(m)

    def test_m2b_df_floor_and_scale(self):
        rng = np.random.default_rng(3)
        s = generate(model_spec("m2b", c=1.0), 100_000, rng)
        eps = s.y - (s.x - 0.5 * s.x**2)
        # symmetric around zero everywhere
        assert abs(np.median(eps)) < 4 * 1.2533 * 0.1 / np.sqrt(len(eps))
        # variance normalization Var(eps|x) = 1/100; checked where the
        # degrees of freedom are high enough for the sample sd to settle
        # (x near 1 has df near 2 and infinite kurtosis)
        sel = s.x < 0.05
        assert np.std(eps[sel]) == pytest.approx(0.1, rel=0.1)

    def test_m3h_scale_and_drift(self):
        # b=0: errors are (2+x)/10 * (U - 0.5), so bounded by (2+x)/20
        rng = np.random.default_rng(4)
        s = generate(model_spec("m3h", b=0), 20_000, rng)
        eps = s.y - (s.x - 0.5 * s.x**2)
        bound = (2 + s.x) / 20
        assert np.all(np.abs(eps) <= bound + 1e-12)

    def test_heteroscedastic_variance_profile(self):
        rng = np.random.default_rng(5)
        s = generate(model_spec("m1h", a=0), 200_000, rng)
        eps = s.y - (s.x - 0.5 * s.x**2)
        lo = eps[s.x < 0.2]
        hi = eps[s.x > 0.8]
        # sd ratio should track (2+x)/10 midpoints: 0.21 vs 0.29
        assert np.std(hi) / np.std(lo) == pytest.approx(0.29 / 0.21, rel=0.05)

    def test_m3_b0_chi2_independence(self):
        rng = np.random.default_rng(6)
        s = generate(model_spec("m3", b=0), 100_000, rng)
        u = s.y - (s.x - 0.5 * s.x**2) + 0.5
        counts = np.histogram2d(s.x, u, bins=[4, 4],
                                range=[[0, 1], [0, 1]])[0]
        assert chi2_contingency(counts).pvalue > 0.01

    def test_m3_b1_dependence_detected(self):
        rng = np.random.default_rng(7)
        s = generate(model_spec("m3", b=1), 100_000, rng)
        u = s.y - (s.x - 0.5 * s.x**2) + (1 / 6) * (2 * s.x - 1) + 0.5
        counts = np.histogram2d(s.x, u, bins=[4, 4],
                                range=[[0, 1], [0, 1]])[0]
        assert chi2_contingency(counts).pvalue < 1e-6

    def test_n_validation(self):
        with pytest.raises(ValueError):
            generate(model_spec("m5"), 0, np.random.default_rng(0))


class TestTrueQuantile:
    def test_m4_median(self):
        assert true_quantile(model_spec("m4", beta=0), 0.5, 0.3) == \
            pytest.approx(1.3, abs=1e-14)

    def test_m5_median_is_half_x(self):
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(true_quantile(model_spec("m5"), 0.5, x),
                                   x / 2, atol=1e-14)

    def test_m5_upper_quartile(self):
        assert true_quantile(model_spec("m5"), 0.75, 0.5) == \
            pytest.approx(0.384898, abs=1e-6)

    def test_unsupported_model(self):
        with pytest.raises(ValueError):
            true_quantile(model_spec("m1", a=0), 0.5, 0.5)
        with pytest.raises(ValueError):
            true_quantile(model_spec("m4", beta=0), 0.0, 0.5)


class TestRunStudy:
    def test_forced_reject_stub(self, monkeypatch):
        class Stub:
            reject_ks = True
            reject_cvm = False

        monkeypatch.setattr(sim, "bootstrap_test",
                            lambda *a, **k: Stub())
        res = run_study(model_spec("m3", b=0), n=60, runs=1, B=2, tau=0.5,
                        level=0.05, test_kind="location", root_seed=0)
        assert res.reject_rate_ks == 1.0 and res.reject_rate_cvm == 0.0
        assert res.failures == 0

    def test_failures_counted(self, monkeypatch):
        def boom(*a, **k):
            raise TrimEmpty("forced")

        monkeypatch.setattr(sim, "bootstrap_test", boom)
        res = run_study(model_spec("m3", b=0), n=60, runs=3, B=2, tau=0.5,
                        level=0.05, test_kind="location", root_seed=0)
        assert res.failures == 3
        assert res.reject_rate_ks == 0.0 and res.reject_rate_cvm == 0.0

    def test_determinism_and_worker_invariance(self):
        kw = dict(model=model_spec("m3", b=0), n=60, runs=6, B=5, tau=0.5,
                  level=0.05, test_kind="location", root_seed=42)
        r1 = run_study(workers=1, **kw)
        r1b = run_study(workers=1, **kw)
        r2 = run_study(workers=2, **kw)
        assert r1 == r1b == r2
        assert isinstance(r1, StudyResult)
        row = r1.to_row()
        assert row["model"] == "m3" and row["runs"] == 6

    def test_runs_differ_across_seeds(self):
        # distinct per-run streams: not all 6 runs produce identical samples
        tasks = [sim._run_one((model_spec("m1", a=0), 40, 1, 0.5, 0.05,
                               "location", 7, i)) for i in range(3)]
        assert [t[0] for t in tasks] == [0, 1, 2]

    def test_validation(self):
        with pytest.raises(ValueError):
            run_study(model_spec("m5"), 50, 0, 2, 0.5, 0.05, "monotone", 0)
        with pytest.raises(ValueError):
            run_study(model_spec("m5"), 50, 1, 2, 0.5, 0.05, "monotone", 0,
                      workers=0)
