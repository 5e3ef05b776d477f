import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sobol_rank.estimators import eta_avg, eta_lags, order_by_input
from sobol_rank.models import BiasBoundSpec, ModelSpec, Uniform, make_model, sample_model, theory_summary
from sobol_rank.study import (
    StudyConfig,
    StudyError,
    averages,
    bias_bound_check,
    boxplot_stats,
    empirical_lag_cov,
    estimator_stats,
    lag_covariance,
    mse_curve,
    run_study,
    simulate_lags,
)

SIN5 = make_model("sin5/vquad", "uniform(0,1)")


def small_config(model=SIN5, **kw):
    base = dict(sample_sizes=(40, 80), max_lag=6, avg_ks=(2, 4, 6), replications=300, base_seed=3)
    base.update(kw)
    return StudyConfig(model=model, **base)


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(max_lag=40),
            dict(replications=1),
            dict(avg_ks=(7,)),
            dict(avg_ks=(0,)),
            dict(base_seed=-1),
            dict(k_rule="sqrt"),
            dict(k_rule="fixed(40)"),
            dict(sample_sizes=()),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            small_config(**kw)

    def test_k_rule(self):
        assert small_config().k_for(1000) == 10
        assert small_config(k_rule="fixed(3)").k_for(1000) == 3


class TestSimulateLags:
    def test_rows_match_core_estimators(self):
        values = simulate_lags(SIN5, 50, 7, 600, 11, threads=1)
        for r in (0, 255, 256, 599):
            ordered = order_by_input(sample_model(SIN5, 50, (11, 50, r)))
            est = eta_lags(ordered, 7)
            assert np.array_equal(values[r], est.values)
            assert averages(values, 7)[r] == eta_avg(est)
            assert averages(values[r : r + 1], 3)[0] == eta_avg(eta_lags(ordered, 3))

    def test_thread_count_invariance(self):
        a = simulate_lags(SIN5, 60, 5, 1000, 0, threads=1)
        b = simulate_lags(SIN5, 60, 5, 1000, 0, threads=4)
        assert a.tobytes() == b.tobytes()

    def test_env_thread_cap(self, monkeypatch):
        monkeypatch.setenv("SOBOL_RANK_THREADS", "3")
        a = simulate_lags(SIN5, 60, 5, 700, 0)
        assert a.tobytes() == simulate_lags(SIN5, 60, 5, 700, 0, threads=1).tobytes()

    def test_failure_reports_seed(self):
        bad = ModelSpec(phi=np.sin, v=lambda x: x - 0.99, input_law=Uniform())
        with pytest.raises(StudyError) as info:
            simulate_lags(bad, 500, 2, 10, 4, threads=1)
        assert info.value.seed[:2] == (4, 500)
        assert str(info.value.seed) in str(info.value)


class TestStatistics:
    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=200), st.floats(-1e6, 1e6))
    def test_mse_decomposition_and_quantile_order(self, values, truth):
        s = estimator_stats(np.array(values), truth, 10, 1)
        assert s.mse == pytest.approx(s.bias**2 + s.variance, rel=1e-10, abs=1e-300)
        b = s.box
        assert b.q05 <= b.q25 <= b.median <= b.q75 <= b.q95

    def test_type7_quantiles(self):
        b = boxplot_stats(np.arange(1.0, 11.0))
        # type 7: h = (n - 1) p
        assert [b.q05, b.q25, b.median, b.q75, b.q95] == pytest.approx([1.45, 3.25, 5.5, 7.75, 9.55], rel=1e-14)
        assert b.n_points == 10

    def test_lag_covariance(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(4000, 3)) @ np.array([[1, 0.5, 0], [0, 1, 0.2], [0, 0, 1]])
        cov, se = lag_covariance(vals, 10)
        np.testing.assert_allclose(cov, 10 * np.cov(vals, rowvar=False), rtol=1e-12)
        assert np.array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-12
        assert np.all(se > 0)


class TestRunStudy:
    def test_report_shape_and_invariants(self):
        cfg = small_config()
        rep = run_study(cfg, threads=1)
        assert len(rep.lags) == 2 * 6 and len(rep.avgs) == 2 * 3
        for s in rep.lags + rep.avgs:
            assert s.mse == pytest.approx(s.bias**2 + s.variance, rel=1e-10)
            assert s.box.q05 <= s.box.q25 <= s.box.median <= s.box.q75 <= s.box.q95
            assert s.bias == pytest.approx(s.box.mean - rep.theory.eta, rel=1e-12, abs=1e-14)
        for cov in rep.covariances.values():
            assert cov.shape == (6, 6) and np.array_equal(cov, cov.T)
            assert np.linalg.eigvalsh(cov).min() > -1e-9

    def test_deterministic(self):
        a, b = run_study(small_config(), threads=1), run_study(small_config(), threads=4)
        assert a.lags == b.lags and a.avgs == b.avgs
        for n in a.covariances:
            assert a.covariances[n].tobytes() == b.covariances[n].tobytes()

    def test_grid_change_keeps_streams(self):
        a = run_study(small_config(sample_sizes=(40, 80)), threads=1)
        b = run_study(small_config(sample_sizes=(80,)), threads=1)
        assert [s for s in a.lags if s.n == 80] == b.lags

    def test_noiseless_identity(self):
        cfg = small_config(model=make_model("identity/zero"), sample_sizes=(50, 400, 3200), replications=200)
        rep = run_study(cfg, threads=1)
        lag1 = [s for s in rep.lags if s.index == 1]
        assert lag1[0].mse > lag1[1].mse > lag1[2].mse
        assert lag1[2].variance < 1e-4 and abs(lag1[2].bias) < 1e-2

    def test_average_variance_non_increasing(self):
        cfg = small_config(sample_sizes=(400,), max_lag=20, avg_ks=(1, 5, 10, 20), replications=3000)
        avgs = run_study(cfg, threads=1).avgs
        for prev, nxt in zip(avgs, avgs[1:]):
            # standard error of a variance estimate, roughly var * sqrt(2 / N)
            se = prev.variance * np.sqrt(2 / 3000)
            assert nxt.variance <= prev.variance + 2 * se


class TestMseCurve:
    def test_rows(self):
        rows = mse_curve(small_config(sample_sizes=(30, 64, 125)), threads=1)
        assert len(rows) == 9
        assert [r.estimator for r in rows[:3]] == ["lag1", "lagk", "avg"]
        assert [r.k for r in rows[::3]] == [3, 4, 5]
        for r in rows:
            assert r.n_mse == pytest.approx(r.n_bias2 + r.n_var, rel=1e-10)

    def test_noiseless_reference(self):
        model = make_model("sin5/zero")
        th = theory_summary(model)
        rows = mse_curve(small_config(model=model, sample_sizes=(30, 100)), threads=1)
        assert all(r.reference == th.sigma2_opt == r.sigma2_rank for r in rows)

    def test_k_one_at_lag_one(self):
        rows = mse_curve(small_config(sample_sizes=(10,), max_lag=2, avg_ks=(1,), k_rule="fixed(1)"), threads=1)
        assert rows[0].n_mse == rows[1].n_mse == rows[2].n_mse


class TestEmpiricalCov:
    def test_noiseless_rank_one(self):
        model = make_model("sin5/zero")
        th = theory_summary(model)
        cfg = small_config(model=model, sample_sizes=(1000,), max_lag=4, avg_ks=(4,), replications=2000)
        cov = empirical_lag_cov(cfg, 1000, 4, threads=1)
        np.testing.assert_allclose(cov, th.var_phi2, rtol=0.15)
        eig = np.linalg.eigvalsh(cov)
        assert eig[-1] > 50 * eig[-2]

    def test_k_one(self):
        cfg = small_config(sample_sizes=(500,), max_lag=3, avg_ks=(1,), replications=4000)
        cov, se = empirical_lag_cov(cfg, 500, 1, threads=1, return_se=True)
        th = theory_summary(SIN5)
        assert cov.shape == (1, 1)
        assert abs(cov[0, 0] - th.sigma2_rank) < 4 * se[0, 0] + 0.05 * th.sigma2_rank

    def test_errors(self):
        with pytest.raises(ValueError):
            empirical_lag_cov(small_config(), 41, 2)
        with pytest.raises(ValueError):
            empirical_lag_cov(small_config(), 40, 7)


class TestBiasBoundCheck:
    def test_constant_phi_trivial(self):
        model = ModelSpec(phi=lambda x: np.full_like(x, 2.0), v=lambda x: np.zeros_like(x), input_law=Uniform())
        rows = bias_bound_check(small_config(model=model), BiasBoundSpec(2, 0, 0, 0), threads=1, range_replicates=200)
        assert all(r.abs_bias == 0.0 and r.satisfied for r in rows)

    def test_sin5_small(self):
        cfg = small_config(sample_sizes=(100,), max_lag=10, avg_ks=(5,), replications=2000)
        rows = bias_bound_check(cfg, BiasBoundSpec(1, 5, 4, 8), threads=1, range_replicates=2000)
        assert len(rows) == 10 and all(r.satisfied for r in rows)
        assert rows[1].bound == pytest.approx(2 * 99 / 98 * rows[0].bound, rel=0.01)
