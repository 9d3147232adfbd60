"""Forest fitting: averaging identity, seed scheme and thread independence.

A forest's prediction must be the exact mean of its member trees, fits must
be bit-identical across thread counts and reproducible from the seed, and
per-tree randomness must be namespaced so that prefixes of a larger forest
coincide with smaller forests under the same seed.
"""

import json

import numpy as np
import pytest

from freqsev import (
    Forest,
    ForestParams,
    LossKind,
    NodeShrinkage,
    fit_forest,
    forest_from_dict,
    forest_to_dict,
    predict_forest,
)


def _params(**kw):
    base = dict(n_trees=8, m=2, delta=0.75, gamma=0.25, kappa=0.05, loss=LossKind.POISSON)
    base.update(kw)
    return ForestParams(**base)


@pytest.fixture(scope="module")
def small_problem(freq_problem):
    return freq_problem.subset(np.arange(400))


class TestAveragingIdentity:
    def test_prediction_is_the_exact_tree_mean(self, small_problem):
        forest = fit_forest(small_problem, _params(), seed=3)
        X = small_problem.X
        stacked = np.stack([t.predict_matrix(X) for t in forest.trees])
        np.testing.assert_array_equal(predict_forest(forest, X), stacked.mean(axis=0))

    def test_predict_matrix_matches_module_function(self, small_problem):
        forest = fit_forest(small_problem, _params(n_trees=4), seed=3)
        X = small_problem.X[:50]
        np.testing.assert_array_equal(forest.predict_matrix(X), predict_forest(forest, X))


class TestDeterminism:
    def test_thread_counts_do_not_change_the_fit(self, small_problem):
        by_threads = [
            fit_forest(small_problem, _params(), seed=11, n_threads=k) for k in (1, 4, 8)
        ]
        base = by_threads[0].predict_matrix(small_problem.X)
        for forest in by_threads[1:]:
            np.testing.assert_array_equal(forest.predict_matrix(small_problem.X), base)

    def test_same_seed_same_forest_different_seed_different_forest(self, small_problem):
        a = fit_forest(small_problem, _params(), seed=11)
        b = fit_forest(small_problem, _params(), seed=11)
        c = fit_forest(small_problem, _params(), seed=12)
        np.testing.assert_array_equal(
            a.predict_matrix(small_problem.X), b.predict_matrix(small_problem.X)
        )
        assert np.any(a.predict_matrix(small_problem.X) != c.predict_matrix(small_problem.X))

    def test_smaller_forest_is_a_prefix_of_the_larger(self, small_problem):
        """Per-tree seed namespacing makes ensemble sizes nested."""
        big = fit_forest(small_problem, _params(n_trees=8), seed=7)
        small = fit_forest(small_problem, _params(n_trees=4), seed=7)
        X = small_problem.X[:80]
        for t_small, t_big in zip(small.trees, big.trees):
            np.testing.assert_array_equal(t_small.predict_matrix(X), t_big.predict_matrix(X))

    def test_spawn_prefix_namespaces_the_randomness(self, small_problem):
        a = fit_forest(small_problem, _params(n_trees=3), seed=7, spawn_prefix=(0, 1))
        b = fit_forest(small_problem, _params(n_trees=3), seed=7, spawn_prefix=(0, 2))
        pa = a.predict_matrix(small_problem.X)
        pb = b.predict_matrix(small_problem.X)
        assert np.any(pa != pb)


class TestBootstrapAndSampling:
    def test_bootstrap_size_is_the_rounded_share(self, small_problem):
        for delta in (0.5, 0.75, 1.0):
            forest = fit_forest(small_problem, _params(n_trees=2, delta=delta), seed=5)
            want = round(delta * small_problem.n)
            for tree in forest.trees:
                assert tree.n_root == want

    def test_bootstrap_off_removes_row_resampling(self, small_problem):
        """Without bootstrap and with m=p, every tree sees the same problem."""
        p = small_problem.p
        forest = fit_forest(
            small_problem, _params(n_trees=3, m=p, bootstrap=False, delta=1.0), seed=9
        )
        X = small_problem.X[:60]
        first = forest.trees[0].predict_matrix(X)
        for tree in forest.trees[1:]:
            np.testing.assert_array_equal(tree.predict_matrix(X), first)

    def test_feature_subsampling_varies_the_trees(self, small_problem):
        forest = fit_forest(small_problem, _params(n_trees=6, m=1), seed=13)
        root_features = {t.root.feature for t in forest.trees if hasattr(t.root, "feature")}
        assert len(root_features) > 1

    def test_trees_shrink_towards_their_own_bootstrap_rate(self, small_problem):
        forest = fit_forest(small_problem, _params(n_trees=5, gamma=0.25), seed=17)
        rates = {t.shrinkage.root_rate for t in forest.trees}
        assert all(r is not None and r > 0 for r in rates)
        assert len(rates) > 1  # bootstrap samples differ, so do their rates

    def test_gamma_zero_shrinks_each_tree_to_its_sample_rate(self, small_problem):
        """The full-shrinkage endpoint collapses every tree to a constant."""
        params = _params(n_trees=3, gamma=0.0)
        forest = fit_forest(small_problem, params, seed=19)
        for tree in forest.trees:
            preds = tree.predict_matrix(small_problem.X)
            np.testing.assert_array_equal(preds, tree.shrinkage.root_rate)

    def test_severity_forests_never_shrink(self, sev_problem):
        params = _params(n_trees=2, loss=LossKind.GAMMA, kappa=0.1)
        forest = fit_forest(sev_problem, params, seed=21)
        assert all(not t.shrinkage.enabled for t in forest.trees)
        assert all(t.loss is LossKind.GAMMA for t in forest.trees)


class TestValidation:
    def test_params_bounds(self):
        with pytest.raises(ValueError):
            _params(n_trees=0)
        with pytest.raises(ValueError):
            _params(m=0)
        with pytest.raises(ValueError):
            _params(delta=0.0)
        with pytest.raises(ValueError):
            _params(gamma=-0.1)

    def test_m_beyond_feature_count_raises(self, small_problem):
        with pytest.raises(ValueError, match="m="):
            fit_forest(small_problem, _params(m=small_problem.p + 1), seed=1)

    def test_loss_mismatch_raises(self, small_problem):
        with pytest.raises(ValueError, match="does not match"):
            fit_forest(small_problem, _params(loss=LossKind.GAMMA), seed=1)


class TestSerialization:
    def test_dict_round_trip_is_bitwise(self, small_problem):
        forest = fit_forest(small_problem, _params(n_trees=4), seed=23)
        payload = json.loads(json.dumps(forest_to_dict(forest)))
        back = forest_from_dict(payload)
        np.testing.assert_array_equal(
            back.predict_matrix(small_problem.X), forest.predict_matrix(small_problem.X)
        )
        assert back.params == forest.params
        assert back.seed == forest.seed
        assert len(back.trees) == len(forest.trees)

    def test_rejects_foreign_payloads(self):
        with pytest.raises(ValueError, match="serialized forest"):
            forest_from_dict({"model": "tree"})
