import math

import numpy as np
import pytest

import cfglmm.evaluate as evaluate_mod
from cfglmm import (
    FitConfig,
    SimScenario,
    deviance,
    fit_cf,
    fit_glm,
    get_family,
    pearson,
    predict,
    pseudo_r2,
    rmse,
    run_experiment,
    scale_correlations,
    timing_curve,
)
from cfglmm.evaluate import run_trial, trial_seed
from cfglmm.families import add_intercept
from cfglmm.simulate import gen_poisson


class TestRmse:
    def test_identical_vectors(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_value(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(25.0 / 2.0))

    def test_matches_scalar_loop(self, rng):
        a = rng.normal(size=100)
        b = rng.normal(size=100)
        want = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)) / 100)
        assert rmse(a, b) == pytest.approx(want, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            rmse([1.0], [1.0, 2.0])


class TestPseudoR2:
    def test_no_improvement_is_zero(self):
        assert pseudo_r2(10.0, 10.0) == 0.0

    def test_perfect_fit_is_one(self):
        assert pseudo_r2(0.0, 10.0) == 1.0

    def test_half(self):
        assert pseudo_r2(5.0, 10.0) == 0.5

    def test_zero_null_errors(self):
        with pytest.raises(ValueError):
            pseudo_r2(1.0, 0.0)

    def test_cf_model_not_below_nested_glm(self):
        sim = gen_poisson(SimScenario(beta0=0.5, n_train=500, n_test=0), seed=17)
        d = sim.train
        family = get_family(d.family_tag)
        design = add_intercept(d.covariates)
        null_fit = fit_glm(
            type(d)(d.sites, d.response, np.empty((d.n_sites, 0)), d.family_tag, d.offset)
        )
        dev_null = deviance(family, d.response, family.clamp_mu(family.inv_link(np.full(d.n_sites, null_fit.beta[0]) + d.offset)))
        glm = fit_glm(d)
        dev_glm = deviance(family, d.response, family.clamp_mu(family.inv_link(design @ glm.beta + d.offset)))
        model = fit_cf(d, FitConfig(rng_seed=17))
        pred = predict(model, d.sites, d.covariates, d.offset)
        dev_cf = deviance(family, d.response, pred.mu)
        assert pseudo_r2(dev_cf, dev_null) >= pseudo_r2(dev_glm, dev_null)


class TestPearson:
    def test_identity(self, rng):
        a = rng.normal(size=50)
        assert pearson(a, a) == pytest.approx(1.0)

    def test_negation(self, rng):
        a = rng.normal(size=50)
        assert pearson(a, -a) == pytest.approx(-1.0)

    def test_zero_variance_flagged(self):
        with pytest.warns(UserWarning, match="zero-variance"):
            assert pearson(np.ones(10), np.arange(10.0)) == 0.0

    def test_matches_numpy(self, rng):
        a = rng.normal(size=80)
        b = 0.3 * a + rng.normal(size=80)
        assert pearson(a, b) == pytest.approx(np.corrcoef(a, b)[0, 1], rel=1e-10)


class TestScaleCorrelations:
    def test_band_count_mismatch(self):
        sim = gen_poisson(SimScenario(beta0=0.5, n_train=300, n_test=0), seed=1)
        model = fit_cf(sim.train, FitConfig(rng_seed=1))
        with pytest.raises(ValueError, match="band count"):
            scale_correlations(model, sim.train.sites, [sim.truth_train.z], (1.9, 0.5))


@pytest.fixture(scope="module")
def small_report():
    scn = SimScenario(beta0=0.5, n_train=150, n_test=100)
    return scn, run_experiment(scn, 3, seed=77)


class TestRunExperiment:

    def test_reproducible(self, small_report):
        scn, report = small_report
        again = run_experiment(scn, 3, seed=77)
        for a, b in zip(report.trials, again.trials):
            # everything except wall time must be bit-identical
            assert a.seed == b.seed
            assert a.rmse_in == b.rmse_in
            assert a.rmse_out == b.rmse_out
            assert a.rmse_out_glm == b.rmse_out_glm
            assert a.beta_hat == b.beta_hat
            assert a.accepted_scales == b.accepted_scales
            assert a.fit_seconds > 0 and b.fit_seconds > 0

    def test_glm_rmse_present_for_every_trial(self, small_report):
        _, report = small_report
        for t in report.ok_trials():
            assert np.isfinite(t.rmse_out_glm)
            assert np.isfinite(t.rmse_in_glm)

    def test_quantiles_consistent_with_trials(self, small_report):
        _, report = small_report
        outs = [t.rmse_out for t in report.ok_trials()]
        assert report.quantiles["rmse_out"][2] == pytest.approx(float(np.median(outs)))
        assert report.quantiles["rmse_out"][0] == pytest.approx(min(outs))
        assert report.quantiles["rmse_out"][4] == pytest.approx(max(outs))

    def test_trial_failure_recorded_not_fatal(self, monkeypatch):
        scn = SimScenario(beta0=0.5, n_train=150, n_test=50)
        real = evaluate_mod.fit_cf
        bad_seed = trial_seed(77, 1)

        def flaky(dataset, cfg, *args, **kwargs):
            if cfg.rng_seed == bad_seed:
                raise RuntimeError("boom")
            return real(dataset, cfg, *args, **kwargs)

        monkeypatch.setattr(evaluate_mod, "fit_cf", flaky)
        report = run_experiment(scn, 3, seed=77)
        errors = [t for t in report.trials if t.error]
        assert len(errors) == 1
        assert "boom" in errors[0].error
        assert len(report.ok_trials()) == 2

    def test_multiscale_correlations_attached(self):
        scn = SimScenario(beta0=0.5, n_train=300, n_test=0, multiscale=(3.0, 0.8, 0.3))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = run_trial(scn, seed=5)
        assert result.scale_correlations is not None
        assert len(result.scale_correlations) == 3
        assert all(-1.0 <= c <= 1.0 for c in result.scale_correlations)


class TestTimingCurve:
    def test_positive_and_monotone(self):
        scn = SimScenario(beta0=0.5, n_train=0, n_test=0)
        curve = timing_curve([150, 1200], scn, seed=1, repeats=1)
        assert len(curve) == 2
        assert all(seconds > 0 for _, seconds in curve)
        assert curve[1][1] > curve[0][1]

    def test_rejects_unordered_sizes(self):
        with pytest.raises(ValueError, match="ascending"):
            timing_curve([500, 500], SimScenario(), seed=0)
