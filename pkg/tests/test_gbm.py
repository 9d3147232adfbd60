"""Boosting: replay oracle, trace monotonicity, intercepts and line searches.

The replay oracle re-runs the whole boosting loop from its public building
blocks -- seeded subsampling, pseudo-residual trees, per-region line
searches, damped leaf updates -- and demands the fitted model bit for bit.
Stage-count nesting, the training-deviance trace and both loss families'
closed-form intercepts are checked independently.
"""

import json
import math

import numpy as np
import pytest

from freqsev import (
    FeatureSpec,
    Gbm,
    GbmParams,
    LossKind,
    RegressionProblem,
    TreeParams,
    deviance,
    fit_gbm,
    gbm_from_dict,
    gbm_to_dict,
    grow,
    negative_gradient,
    predict_gbm,
    staged_deviance,
)


def _params(**kw):
    base = dict(n_stages=12, depth=2, lam=0.2, delta=0.75, kappa=0.05, loss=LossKind.POISSON)
    base.update(kw)
    return GbmParams(**base)


@pytest.fixture(scope="module")
def small_problem(freq_problem):
    return freq_problem.subset(np.arange(500))


def _replay(problem, params, seed, spawn_prefix=()):
    """Independent re-run of the boosting loop from public primitives."""
    X, y, w = problem.X, problem.y, problem.w
    n = problem.n
    if params.loss is LossKind.POISSON:
        f0 = float(np.log(np.sum(y) / np.sum(w)))
    else:
        f0 = float(np.log(np.sum(y * w) / np.sum(w)))
    f = np.full(n, f0)
    stage_params = TreeParams(loss=LossKind.SQUARED_ERROR, cp=0.0,
                              kappa=params.kappa, max_depth=params.depth)
    predictions = []
    for t in range(params.n_stages):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=spawn_prefix + (t,)))
        rows = np.sort(rng.choice(n, size=round(params.delta * n), replace=False))
        residual = negative_gradient(params.loss, y[rows], w[rows], f[rows])
        stage = grow(
            RegressionProblem(loss=LossKind.SQUARED_ERROR, X=X[rows],
                              features=problem.features, y=residual,
                              w=np.ones(len(rows))),
            stage_params,
        )
        regions = stage.apply_matrix(X[rows])
        for k, leaf in enumerate(stage.leaves()):
            members = rows[regions == k]
            if params.loss is LossKind.POISSON:
                num = float(np.sum(y[members]))
                den = float(np.sum(w[members] * np.exp(f[members])))
            else:
                num = float(np.sum(w[members] * y[members] * np.exp(-f[members])))
                den = float(np.sum(w[members]))
            step = 0.0 if num <= 0 or den <= 0 else float(np.log(num / den))
            leaf.value = params.lam * step
        f = f + stage.predict_matrix(X)
        predictions.append(np.exp(f))
    return f0, predictions


class TestReplayOracle:
    @pytest.mark.parametrize("loss", [LossKind.POISSON, LossKind.GAMMA])
    def test_fit_matches_the_replayed_loop_bitwise(self, small_problem, sev_problem, loss):
        problem = small_problem if loss is LossKind.POISSON else sev_problem
        params = _params(n_stages=6, loss=loss)
        model = fit_gbm(problem, params, seed=29)
        f0, staged = _replay(problem, params, seed=29)
        assert model.f0 == f0
        for t in (1, 3, 6):
            np.testing.assert_array_equal(
                model.predict_matrix(problem.X, n_stages=t), staged[t - 1]
            )

    def test_spawn_prefix_matches_the_replay_and_changes_the_draws(self, small_problem):
        params = _params(n_stages=3)
        model = fit_gbm(small_problem, params, seed=31, spawn_prefix=(2, 5))
        _, staged = _replay(small_problem, params, seed=31, spawn_prefix=(2, 5))
        np.testing.assert_array_equal(model.predict_matrix(small_problem.X), staged[-1])
        other = fit_gbm(small_problem, params, seed=31, spawn_prefix=(2, 6))
        assert np.any(model.predict_matrix(small_problem.X)
                      != other.predict_matrix(small_problem.X))


class TestIntercepts:
    def test_poisson_intercept_is_the_log_rate(self, small_problem):
        model = fit_gbm(small_problem, _params(n_stages=1), seed=1)
        want = math.log(small_problem.y.sum() / small_problem.w.sum())
        np.testing.assert_allclose(model.f0, want, rtol=1e-15)

    def test_gamma_intercept_is_the_log_weighted_mean(self, sev_problem):
        model = fit_gbm(sev_problem, _params(n_stages=1, loss=LossKind.GAMMA), seed=1)
        want = math.log(float(np.sum(sev_problem.y * sev_problem.w)) / sev_problem.w.sum())
        np.testing.assert_allclose(model.f0, want, rtol=1e-15)

    def test_all_zero_counts_cannot_be_boosted(self):
        problem = RegressionProblem(
            loss=LossKind.POISSON,
            X=np.linspace(0, 1, 8).reshape(-1, 1),
            features=(FeatureSpec("x", "continuous"),),
            y=np.zeros(8),
            w=np.ones(8),
        )
        with pytest.raises(ValueError, match="all zero"):
            fit_gbm(problem, _params(n_stages=1), seed=0)


class TestTrainingTrace:
    def test_trace_starts_at_the_intercept_deviance(self, small_problem):
        model = fit_gbm(small_problem, _params(n_stages=4), seed=5)
        d0 = deviance(LossKind.POISSON, small_problem.y,
                      np.full(small_problem.n, math.exp(model.f0)), small_problem.w)
        np.testing.assert_allclose(model.trace[0], d0, rtol=1e-12)
        assert len(model.trace) == 5

    @pytest.mark.parametrize("loss", [LossKind.POISSON, LossKind.GAMMA])
    def test_full_sample_trace_is_non_increasing(self, small_problem, sev_problem, loss):
        """With delta=1 every stage weakly improves the training deviance."""
        problem = small_problem if loss is LossKind.POISSON else sev_problem
        model = fit_gbm(problem, _params(n_stages=40, delta=1.0, loss=loss), seed=7)
        steps = np.diff(model.trace)
        assert steps.max() <= 1e-10

    def test_trace_matches_staged_deviance_on_the_training_data(self, small_problem):
        model = fit_gbm(small_problem, _params(n_stages=5), seed=9)
        np.testing.assert_allclose(
            staged_deviance(model, small_problem.X, small_problem.y, small_problem.w),
            model.trace, rtol=1e-12,
        )


class TestStageNesting:
    def test_shorter_run_is_a_prefix_of_the_longer(self, small_problem):
        long = fit_gbm(small_problem, _params(n_stages=10), seed=11)
        short = fit_gbm(small_problem, _params(n_stages=4), seed=11)
        assert short.f0 == long.f0
        np.testing.assert_array_equal(
            short.predict_matrix(small_problem.X),
            long.predict_matrix(small_problem.X, n_stages=4),
        )
        np.testing.assert_array_equal(short.trace, long.trace[:5])

    def test_stage_count_bounds(self, small_problem):
        model = fit_gbm(small_problem, _params(n_stages=3), seed=13)
        with pytest.raises(ValueError, match="n_stages"):
            model.link_matrix(small_problem.X, n_stages=4)
        zero = model.predict_matrix(small_problem.X, n_stages=0)
        np.testing.assert_array_equal(zero, math.exp(model.f0))


class TestLineSearch:
    def test_unsplittable_stage_recenters_the_intercept(self):
        """With one distinct x the stage tree is a single leaf whose damped
        step pulls the constant fit towards the optimum."""
        rng = np.random.default_rng(37)
        y = rng.poisson(0.5, size=40).astype(float)
        y[0] += 1.0  # ensure some claims
        problem = RegressionProblem(
            loss=LossKind.POISSON,
            X=np.ones((40, 1)),
            features=(FeatureSpec("x", "continuous"),),
            y=y,
            w=rng.uniform(0.5, 1.0, size=40),
        )
        lam = 0.3
        model = fit_gbm(problem, GbmParams(n_stages=1, depth=2, lam=lam, delta=1.0,
                                           kappa=0.05, loss=LossKind.POISSON), seed=3)
        stage = model.stages[0]
        assert len(stage.leaves()) == 1
        # the full sample is already balanced at f0, so the step is zero
        np.testing.assert_allclose(stage.leaves()[0].value, 0.0, atol=1e-15)

    def test_zero_claim_regions_take_zero_steps_and_are_counted(self):
        rng = np.random.default_rng(41)
        x = np.linspace(0, 1, 60)
        y = np.where(x < 0.5, 0.0, rng.poisson(2.0, size=60)).astype(float)
        y[-1] = max(y[-1], 1.0)
        problem = RegressionProblem(
            loss=LossKind.POISSON,
            X=x.reshape(-1, 1),
            features=(FeatureSpec("x", "continuous"),),
            y=y,
            w=np.ones(60),
        )
        model = fit_gbm(problem, _params(n_stages=3, delta=1.0, kappa=0.1), seed=5)
        assert model.n_zero_steps >= 1
        # a zero step leaves the claim-free region's predictions untouched
        after_one = model.predict_matrix(problem.X, n_stages=1)
        assert np.any(after_one == math.exp(model.f0))


class TestValidation:
    def test_params_bounds(self):
        with pytest.raises(ValueError):
            _params(n_stages=0)
        with pytest.raises(ValueError):
            _params(depth=0)
        with pytest.raises(ValueError):
            _params(lam=0.0)
        with pytest.raises(ValueError):
            _params(delta=1.5)
        with pytest.raises(ValueError, match="poisson and gamma"):
            _params(loss=LossKind.SQUARED_ERROR)

    def test_loss_mismatch_raises(self, small_problem):
        with pytest.raises(ValueError, match="does not match"):
            fit_gbm(small_problem, _params(loss=LossKind.GAMMA), seed=1)


class TestSerialization:
    def test_dict_round_trip_is_bitwise(self, small_problem):
        model = fit_gbm(small_problem, _params(n_stages=5), seed=43)
        payload = json.loads(json.dumps(gbm_to_dict(model)))
        back = gbm_from_dict(payload)
        np.testing.assert_array_equal(
            back.predict_matrix(small_problem.X), model.predict_matrix(small_problem.X)
        )
        assert back.f0 == model.f0
        assert back.params == model.params
        assert back.n_zero_steps == model.n_zero_steps
        np.testing.assert_array_equal(back.trace, model.trace)

    def test_predict_gbm_matches_method(self, small_problem):
        model = fit_gbm(small_problem, _params(n_stages=3), seed=47)
        np.testing.assert_array_equal(
            predict_gbm(model, small_problem.X, n_stages=2),
            model.predict_matrix(small_problem.X, n_stages=2),
        )
