"""Random forests: bagged trees with per-node feature subsampling.

Each tree is grown on a bootstrap sample (a ``delta`` share of the rows,
drawn with replacement) to maximal size (``cp = 0``), with ``m`` candidate
features re-drawn at every node.  Predictions average the per-tree response
estimates.

Reproducibility contract: tree ``t`` derives its generator from
``SeedSequence(seed, spawn_key=(t,))`` and consumes it in a fixed order —
first the bootstrap row draw, then one feature draw per node in depth-first
order (left before right).  Because every tree's randomness is derived
independently of scheduling, fits are bit-identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import FeatureSpec, RegressionProblem, schema_from_dict, schema_to_dict
from .loss import LossKind, NodeShrinkage
from .tree import Tree, TreeParams, grow, tree_from_dict, tree_to_dict


@dataclass(frozen=True)
class ForestParams:
    """Ensemble size and tree-growth controls.

    ``m`` candidate features are drawn per node; ``delta`` sets the bootstrap
    fraction; ``gamma`` the per-node shrinkage strength of the Poisson
    estimates.  ``bootstrap=False`` grows every tree on the full sample
    (feature subsampling still applies) — useful for deterministic tests.
    """

    n_trees: int
    m: int
    delta: float = 0.75
    gamma: float = 0.25
    kappa: float = 0.01
    cp: float = 0.0
    max_depth: int | None = None
    loss: LossKind = LossKind.POISSON
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        self.tree_params()  # validates gamma, cp, kappa and max_depth eagerly

    def tree_params(self) -> TreeParams:
        shrinkage = (
            NodeShrinkage(gamma=self.gamma)
            if self.loss is LossKind.POISSON
            else NodeShrinkage.disabled()
        )
        return TreeParams(
            loss=self.loss,
            cp=self.cp,
            kappa=self.kappa,
            max_depth=self.max_depth,
            shrinkage=shrinkage,
        )


@dataclass
class Forest:
    trees: list[Tree]
    features: tuple[FeatureSpec, ...]
    params: ForestParams
    seed: int

    @property
    def loss(self) -> LossKind:
        return self.params.loss

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.mean(np.stack([t.predict_matrix(X) for t in self.trees]), axis=0)


def _fit_one(
    problem: RegressionProblem,
    params: ForestParams,
    seed: int,
    t: int,
    spawn_prefix: tuple[int, ...] = (),
) -> Tree:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=spawn_prefix + (t,)))
    n = problem.n
    if params.bootstrap:
        size = round(params.delta * n)
        rows = rng.integers(0, n, size=size)
        sample = problem.subset(rows)
    else:
        sample = problem
    m = min(params.m, problem.p)

    def sampler(p: int) -> np.ndarray:
        return np.sort(rng.choice(p, size=m, replace=False))

    return grow(sample, params.tree_params(), feature_sampler=sampler)


def fit_forest(
    problem: RegressionProblem,
    params: ForestParams,
    seed: int,
    n_threads: int = 1,
    spawn_prefix: tuple[int, ...] = (),
) -> Forest:
    """Fit ``n_trees`` trees; results do not depend on ``n_threads``.

    ``spawn_prefix`` namespaces the per-tree seed derivation — tree ``t``
    uses ``SeedSequence(seed, spawn_key=spawn_prefix + (t,))`` — so nested
    procedures such as cross-validation can keep their fits independent
    while preserving the stage-for-stage match between ensembles of
    different sizes under the same prefix.
    """
    if params.m > problem.p:
        raise ValueError(f"m={params.m} exceeds the {problem.p} available features")
    indices = range(params.n_trees)
    if n_threads <= 1:
        trees = [_fit_one(problem, params, seed, t, spawn_prefix) for t in indices]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            trees = list(pool.map(lambda t: _fit_one(problem, params, seed, t, spawn_prefix), indices))
    return Forest(trees=trees, features=problem.features, params=params, seed=seed)


def predict_forest(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Average of the per-tree response-scale predictions."""
    return forest.predict_matrix(X)


def forest_to_dict(f: Forest) -> dict:
    return {
        "model": "forest",
        "loss": f.loss.value,
        "seed": f.seed,
        "params": {
            "n_trees": f.params.n_trees,
            "m": f.params.m,
            "delta": f.params.delta,
            "gamma": f.params.gamma,
            "kappa": f.params.kappa,
            "cp": f.params.cp,
            "max_depth": f.params.max_depth,
            "bootstrap": f.params.bootstrap,
        },
        "features": schema_to_dict(f.features),
        "trees": [tree_to_dict(t) for t in f.trees],
    }


def forest_from_dict(d: Mapping) -> Forest:
    if d.get("model") != "forest":
        raise ValueError("not a serialized forest")
    pd = d["params"]
    params = ForestParams(
        n_trees=int(pd["n_trees"]),
        m=int(pd["m"]),
        delta=float(pd["delta"]),
        gamma=float(pd["gamma"]),
        kappa=float(pd["kappa"]),
        cp=float(pd["cp"]),
        max_depth=pd.get("max_depth"),
        loss=LossKind(d["loss"]),
        bootstrap=bool(pd.get("bootstrap", True)),
    )
    return Forest(
        trees=[tree_from_dict(td) for td in d["trees"]],
        features=schema_from_dict(d["features"]),
        params=params,
        seed=int(d["seed"]),
    )
