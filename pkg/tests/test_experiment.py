import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import piml.experiment as experiment
from piml.experiment import (
    ExperimentAborted,
    NoiseModel,
    Scenario,
    child_seed,
    default_n_grid,
    fit_rate,
    run_experiment,
)
from piml.regressor import FitError

SMALL = [20, 40, 80]


class TestFitRate:
    def test_exact_power_laws(self):
        n = np.array([10, 100, 1000, 10000])
        slope, intercept, r2 = fit_rate(n, 7 / n)
        assert slope == pytest.approx(-1, abs=1e-12)
        assert intercept == pytest.approx(np.log(7), abs=1e-10)
        assert r2 == pytest.approx(1, abs=1e-12)
        assert fit_rate(n, 3 * n ** (-2 / 3))[0] == pytest.approx(-2 / 3, abs=1e-12)

    def test_drops_non_positive(self):
        n = np.array([10, 20, 40, 80, 160])
        err = 5 / n
        err[1] = 0.0
        assert fit_rate(n, err)[0] == pytest.approx(-1, abs=1e-12)
        with pytest.raises(ValueError):
            fit_rate(n, np.array([1.0, 0.0, -1.0, 0.5, 0.0]))

    @given(st.floats(-3, 0), st.floats(1e-3, 1e3))
    def test_recovers_slope(self, p, c):
        n = np.array([10.0, 30, 100, 300, 1000])
        assert fit_rate(n, c * n**p)[0] == pytest.approx(p, abs=1e-9)


class TestScenarios:
    def test_definitions(self):
        x = np.linspace(-1, 1, 5)
        perfect, imperfect = Scenario.perfect(), Scenario.imperfect()
        assert np.all(perfect.target(x) == 1) and perfect.model_error == 0
        assert np.allclose(imperfect.target(x), 1 + 0.1 * np.abs(x))
        assert imperfect.model_error == pytest.approx(np.sqrt(2 / 300))
        with pytest.raises(ValueError):
            Scenario.named("other")

    def test_noise_models(self):
        rng = np.random.default_rng(0)
        g = NoiseModel("gaussian", 0.5)
        assert g.M == 0.5 and abs(g.sample(rng, 20000).std() - 0.5) < 0.02
        b = NoiseModel("bounded", M=0.2)
        assert b.sigma == 0.2 and np.abs(b.sample(rng, 1000)).max() <= 0.2
        c = NoiseModel("custom", sampler=lambda r, n: np.full(n, 3.0))
        assert np.all(c.sample(rng, 4) == 3.0)
        for bad in (dict(kind="gaussian", sigma=-1.0), dict(kind="bounded"), dict(kind="custom"), dict(kind="x")):
            with pytest.raises(ValueError):
                NoiseModel(**bad)

    def test_default_grid(self):
        grid = default_n_grid()
        assert len(grid) == 12 and grid[0] == 10 and grid[-1] == 10000
        assert np.all(np.diff(grid) > 0)


class TestSeeds:
    def test_child_seed_depends_on_every_key(self):
        base = child_seed(0, 10, 0)
        assert len({base, child_seed(1, 10, 0), child_seed(0, 11, 0), child_seed(0, 10, 1)}) == 4
        assert child_seed(0, 10, 0) == base

    def test_determinism(self):
        a = run_experiment(Scenario.perfect(), SMALL, replicates=2, mc_eval=50, seed=3)
        b = run_experiment(Scenario.perfect(), SMALL, replicates=2, mc_eval=50, seed=3)
        assert a.records == b.records and a.summary() == b.summary()
        c = run_experiment(Scenario.perfect(), SMALL, replicates=2, mc_eval=50, seed=4)
        assert c.records != a.records

    def test_workers_do_not_change_results(self):
        a = run_experiment(Scenario.imperfect(), SMALL, replicates=2, mc_eval=50, seed=5)
        b = run_experiment(Scenario.imperfect(), SMALL, replicates=2, mc_eval=50, seed=5, workers=2)
        assert a.summary() == b.summary()


class TestRunExperiment:
    def test_result_shape(self):
        res = run_experiment(Scenario.perfect(), SMALL, replicates=3, mc_eval=40, seed=0)
        assert list(res.n_grid) == SMALL and len(res.records) == 9
        assert np.all(res.err_mean >= 0) and np.all(res.err_std >= 0)
        assert [(r.n, r.replicate) for r in res.records] == [(n, r) for n in SMALL for r in range(3)]
        assert res.slope == pytest.approx(fit_rate(res)[0])
        assert np.isfinite(fit_rate(res, mean_of_logs=True)[0])

    def test_rejects_bad_grids(self):
        for grid in ([], [10, 10], [1, 5]):
            with pytest.raises(ValueError):
                run_experiment(Scenario.perfect(), grid, replicates=1)

    def test_noiseless_perfect_is_shrinkage_only(self):
        # with f* = 1 and no noise the only error is the lam shrinkage of the constant
        res = run_experiment(Scenario.perfect(sigma=0.0), [100, 1000, 5000], replicates=1, mc_eval=100, seed=0)
        lam = np.log(res.n_grid) / res.n_grid
        predicted = (2 * lam / (1 + 2 * lam)) ** 2
        assert np.allclose(res.err_mean, predicted, rtol=0.1)
        assert res.err_mean[-1] < 1e-4

    def test_ordering_perfect_below_imperfect(self):
        grid = [100, 300, 1000]
        kw = dict(replicates=10, mc_eval=200, seed=1)
        perfect = run_experiment(Scenario.perfect(), grid, **kw)
        imperfect = run_experiment(Scenario.imperfect(), grid, **kw)
        assert np.sum(perfect.err_mean > imperfect.err_mean) <= 1

    def test_failures_abort(self, monkeypatch, caplog):
        def broken(cfg, data, solver="auto"):
            raise FitError("forced", -1.0)

        monkeypatch.setattr(experiment, "fit", broken)
        with caplog.at_level(logging.WARNING), pytest.raises(ExperimentAborted):
            run_experiment(Scenario.perfect(), SMALL, replicates=2, mc_eval=10)
        assert "fit failed" in caplog.text

    def test_few_failures_are_counted(self, monkeypatch):
        real = experiment.fit
        calls = []

        def flaky(cfg, data, solver="auto"):
            calls.append(1)
            if len(calls) == 1:
                raise FitError("forced", -1.0)
            return real(cfg, data, solver)

        monkeypatch.setattr(experiment, "fit", flaky)
        res = run_experiment(Scenario.perfect(), [20, 40, 80, 160], replicates=3, mc_eval=10)
        assert res.failures == 1 and len(res.records) == 11
