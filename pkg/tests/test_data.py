"""Portfolio ingestion, learning views, fold stratification and simulation.

Checks the CSV loader's strict column and row validation, the encoding of
categorical levels, the frequency/severity views' response and weight
conventions, the balance and determinism of stratified folds, and the
reproducibility and marginal behaviour of simulated portfolios.
"""

import numpy as np
import pytest

from freqsev import (
    FeatureSpec,
    FoldAssignment,
    LossKind,
    PolicyRecord,
    Portfolio,
    RegressionProblem,
    SimConfig,
    SimFeature,
    SimTerm,
    Surface,
    encode_row,
    frequency_view,
    load_portfolio,
    schema_from_dict,
    schema_to_dict,
    severity_view,
    sim_config_from_dict,
    sim_config_to_dict,
    simulate_portfolio,
    stratified_folds,
)
from tests.conftest import small_sim_config

SCHEMA = (
    FeatureSpec("age", "continuous"),
    FeatureSpec("fuel", "categorical", ("diesel", "gasoline")),
)


def _record(id="a", expo=1.0, nclaims=0, amount=0.0, age=30.0, fuel="diesel"):
    return PolicyRecord(id=id, expo=expo, nclaims=nclaims, amount=amount,
                        features={"age": age, "fuel": fuel})


class TestFeatureSpec:
    def test_validation(self):
        with pytest.raises(ValueError, match="unknown kind"):
            FeatureSpec("x", "numeric")
        with pytest.raises(ValueError, match=">= 2 levels"):
            FeatureSpec("x", "categorical", ("only",))
        with pytest.raises(ValueError, match="duplicate"):
            FeatureSpec("x", "categorical", ("a", "a"))
        with pytest.raises(ValueError, match="cannot declare levels"):
            FeatureSpec("x", "continuous", ("a", "b"))

    def test_code_of(self):
        spec = FeatureSpec("fuel", "categorical", ("diesel", "gasoline"))
        assert spec.code_of("diesel") == 0
        assert spec.code_of("gasoline") == 1
        with pytest.raises(ValueError, match="unseen level"):
            spec.code_of("electric")


class TestPortfolioValidation:
    def test_record_invariants(self):
        _record().validate()
        with pytest.raises(ValueError, match="expo"):
            _record(expo=1.5).validate()
        with pytest.raises(ValueError, match="nclaims"):
            _record(nclaims=-1).validate()
        with pytest.raises(ValueError, match="zero claims"):
            _record(amount=100.0, nclaims=0).validate()

    def test_validate_names_the_offending_row(self):
        pf = Portfolio(records=(_record(id="a"), _record(id="b", expo=2.0)), schema=SCHEMA)
        with pytest.raises(ValueError, match=r"row 2 \(id='b'\)"):
            pf.validate()

    def test_reserved_feature_names_rejected(self):
        with pytest.raises(ValueError, match="reserved"):
            Portfolio(records=(), schema=(FeatureSpec("expo", "continuous"),))

    def test_feature_matrix_encodes_levels(self):
        pf = Portfolio(records=(_record(fuel="gasoline", age=20.0),
                                _record(id="b", fuel="diesel", age=40.0)), schema=SCHEMA)
        X = pf.feature_matrix()
        np.testing.assert_array_equal(X, [[20.0, 1.0], [40.0, 0.0]])


class TestCsvLoader:
    def _write(self, path, text):
        path.write_text(text, encoding="utf-8")
        return path

    def test_round_trip(self, tmp_path):
        p = self._write(tmp_path / "pf.csv",
                        "id,expo,nclaims,amount,age,fuel\n"
                        "a,1.0,0,0.0,30,diesel\n"
                        "b,0.5,2,1200.5,45,gasoline\n")
        pf = load_portfolio(p, SCHEMA)
        assert pf.ids() == ("a", "b")
        np.testing.assert_array_equal(pf.claim_counts(), [0.0, 2.0])
        np.testing.assert_array_equal(pf.amounts(), [0.0, 1200.5])

    def test_missing_and_undeclared_columns(self, tmp_path):
        p = self._write(tmp_path / "m.csv", "id,expo,nclaims,age,fuel\na,1,0,30,diesel\n")
        with pytest.raises(ValueError, match="missing columns"):
            load_portfolio(p, SCHEMA)
        p2 = self._write(tmp_path / "u.csv",
                         "id,expo,nclaims,amount,age,fuel,extra\na,1,0,0,30,diesel,1\n")
        with pytest.raises(ValueError, match="undeclared columns"):
            load_portfolio(p2, SCHEMA)

    def test_bad_rows_are_named(self, tmp_path):
        p = self._write(tmp_path / "bad.csv",
                        "id,expo,nclaims,amount,age,fuel\n"
                        "a,1.0,0,0.0,30,diesel\n"
                        "b,1.0,x,0.0,45,gasoline\n")
        with pytest.raises(ValueError, match="row 2.*nclaims"):
            load_portfolio(p, SCHEMA)
        p2 = self._write(tmp_path / "lvl.csv",
                         "id,expo,nclaims,amount,age,fuel\na,1.0,0,0.0,30,electric\n")
        with pytest.raises(ValueError, match="row 1.*unseen level"):
            load_portfolio(p2, SCHEMA)

    def test_level_inference_for_open_declarations(self, tmp_path):
        p = self._write(tmp_path / "open.csv",
                        "id,expo,nclaims,amount,age,fuel\n"
                        "a,1.0,0,0.0,30,gasoline\n"
                        "b,1.0,0,0.0,45,lpg\n")
        pf = load_portfolio(p, (FeatureSpec("age", "continuous"),
                                FeatureSpec("fuel", "categorical")))
        assert pf.schema[1].levels == ("gasoline", "lpg")


class TestLearningViews:
    def test_frequency_view_conventions(self, portfolio, freq_problem):
        assert freq_problem.loss is LossKind.POISSON
        np.testing.assert_array_equal(freq_problem.y, portfolio.claim_counts())
        np.testing.assert_array_equal(freq_problem.w, portfolio.exposures())
        assert freq_problem.ids == portfolio.ids()

    def test_severity_view_keeps_paid_claims_only(self, portfolio, sev_problem):
        paying = [r for r in portfolio.records if r.nclaims > 0 and r.amount > 0]
        assert sev_problem.loss is LossKind.GAMMA
        assert sev_problem.n == len(paying)
        np.testing.assert_allclose(
            sev_problem.y, [r.amount / r.nclaims for r in paying], rtol=1e-15
        )
        np.testing.assert_array_equal(sev_problem.w, [r.nclaims for r in paying])

    def test_severity_view_of_claim_free_portfolio_raises(self):
        pf = Portfolio(records=(_record(),), schema=SCHEMA)
        with pytest.raises(ValueError, match="severity view is empty"):
            severity_view(pf)


class TestRegressionProblem:
    def test_validation(self):
        X = np.ones((2, 1))
        spec = (FeatureSpec("x", "continuous"),)
        with pytest.raises(ValueError, match="width"):
            RegressionProblem(LossKind.POISSON, X, (), np.ones(2), np.ones(2))
        with pytest.raises(ValueError, match="strictly positive"):
            RegressionProblem(LossKind.POISSON, X, spec, np.ones(2), np.zeros(2))
        with pytest.raises(ValueError, match="gamma responses"):
            RegressionProblem(LossKind.GAMMA, X, spec, np.array([1.0, 0.0]), np.ones(2))

    def test_subset_allows_repeats(self, freq_problem):
        sub = freq_problem.subset([0, 0, 5])
        assert sub.n == 3
        np.testing.assert_array_equal(sub.X[0], sub.X[1])
        assert sub.ids == (freq_problem.ids[0], freq_problem.ids[0], freq_problem.ids[5])

    def test_encode_row(self):
        x = encode_row(SCHEMA, {"age": 31.0, "fuel": "gasoline"})
        np.testing.assert_array_equal(x, [31.0, 1.0])
        with pytest.raises(ValueError, match="missing feature"):
            encode_row(SCHEMA, {"age": 31.0})
        with pytest.raises(ValueError, match="unseen level"):
            encode_row(SCHEMA, {"age": 31.0, "fuel": "electric"})


class TestStratifiedFolds:
    def test_sizes_and_labels(self, portfolio, folds):
        assert folds.k == 6
        counts = np.bincount(folds.labels)[1:]
        assert counts.max() - counts.min() <= 1
        assert counts.sum() == len(portfolio)

    def test_every_row_in_exactly_one_test_fold(self, portfolio, folds):
        seen = np.zeros(len(portfolio), dtype=int)
        for k in range(1, 7):
            seen[folds.rows(k)] += 1
        np.testing.assert_array_equal(seen, 1)

    def test_claim_rates_are_balanced(self, portfolio, folds):
        """Stratification keeps per-fold aggregate claim rates close together."""
        rates = []
        for k in range(1, 7):
            rows = folds.rows(k)
            rates.append(portfolio.claim_counts()[rows].sum() / portfolio.exposures()[rows].sum())
        overall = portfolio.claim_counts().sum() / portfolio.exposures().sum()
        assert max(abs(r - overall) / overall for r in rates) < 0.05

    def test_deterministic_in_seed(self, portfolio):
        a = stratified_folds(portfolio, k=4, seed=11)
        b = stratified_folds(portfolio, k=4, seed=11)
        c = stratified_folds(portfolio, k=4, seed=12)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert np.any(a.labels != c.labels)

    def test_rows_excluding(self, folds):
        rows = folds.rows_excluding(1, 2)
        assert not np.isin(folds.labels[rows], (1, 2)).any()

    def test_fold_count_validation(self, portfolio):
        with pytest.raises(ValueError):
            stratified_folds(portfolio, k=1, seed=0)
        small = Portfolio(records=(_record(),), schema=SCHEMA)
        with pytest.raises(ValueError):
            stratified_folds(small, k=2, seed=0)

    def test_assignment_invariants(self):
        with pytest.raises(ValueError, match="differ by more than one"):
            FoldAssignment(k=2, labels=np.array([1, 1, 1, 2]))
        with pytest.raises(ValueError, match="must appear"):
            FoldAssignment(k=3, labels=np.array([1, 1, 2, 2]))


class TestSimulation:
    def test_deterministic_in_seed(self):
        cfg = small_sim_config(n=300)
        a, _ = simulate_portfolio(cfg, seed=5)
        b, _ = simulate_portfolio(cfg, seed=5)
        c, _ = simulate_portfolio(cfg, seed=6)
        assert a == b
        assert a != c

    def test_records_satisfy_invariants(self):
        pf, _ = simulate_portfolio(small_sim_config(n=500), seed=9)
        pf.validate()
        expo = pf.exposures()
        assert expo.min() >= 0.5 and expo.max() <= 1.0
        amounts = pf.amounts()
        counts = pf.claim_counts()
        assert np.all((amounts > 0) == (counts > 0))

    def test_counts_track_the_true_surface(self):
        """Observed claim totals agree with the integrated intensity."""
        cfg = small_sim_config(n=20000)
        pf, truth = simulate_portfolio(cfg, seed=10)
        columns = {
            s.name: np.array([r.features[s.name] for r in pf.records], dtype=object)
            for s in pf.schema
        }
        expected = float(np.sum(pf.exposures() * np.exp(truth.freq_surface.evaluate(columns))))
        observed = float(pf.claim_counts().sum())
        assert abs(observed - expected) / expected < 0.05

    def test_amounts_track_the_severity_surface(self):
        cfg = small_sim_config(n=20000)
        pf, truth = simulate_portfolio(cfg, seed=10)
        pos = [r for r in pf.records if r.nclaims > 0]
        columns = {
            s.name: np.array([r.features[s.name] for r in pos], dtype=object)
            for s in pf.schema
        }
        per_claim = np.exp(truth.sev_surface.evaluate(columns))
        expected = float(np.sum(per_claim * [r.nclaims for r in pos]))
        observed = float(sum(r.amount for r in pos))
        assert abs(observed - expected) / expected < 0.1

    def test_config_validation(self):
        with pytest.raises(ValueError, match="exposure range"):
            SimConfig(n=10, features=(), freq_surface=Surface(0.0),
                      sev_surface=Surface(0.0), expo_low=0.0)
        with pytest.raises(ValueError, match="product term"):
            SimTerm("product", "x", coef=1.0)
        with pytest.raises(ValueError, match="probs"):
            SimFeature("c", levels=("a", "b"), probs=(0.9, 0.2))


class TestSerialization:
    def test_schema_round_trip(self):
        back = schema_from_dict(schema_to_dict(SCHEMA))
        assert back == SCHEMA

    def test_sim_config_round_trip(self):
        cfg = small_sim_config(n=123)
        back = sim_config_from_dict(sim_config_to_dict(cfg))
        assert back == cfg
