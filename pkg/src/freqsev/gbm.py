"""Stochastic gradient boosting on the log link.

The model maintains a link score ``f`` per row; predictions are
``exp(f)`` on the response scale (a rate per unit of exposure for counts, a
mean severity for amounts).  Each stage fits an unweighted squared-error
tree of bounded depth to the negative gradient on a fresh subsample (a
``delta`` share of the rows, drawn without replacement), then replaces every
leaf value with ``lam`` times the in-region line-search step, so adding the
stage's predictions to ``f`` performs the damped update.

Reproducibility contract: stage ``t`` (0-based) derives its generator from
``SeedSequence(seed, spawn_key=(t,))`` and uses it only for the subsample
draw, so a fit with a larger ``n_stages`` extends a smaller one stage for
stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import FeatureSpec, RegressionProblem, schema_from_dict, schema_to_dict
from .loss import LossKind, deviance, negative_gradient
from .tree import Tree, TreeParams, grow, tree_from_dict, tree_to_dict


@dataclass(frozen=True)
class GbmParams:
    """Boosting controls: stages, tree depth, damping, subsample share."""

    n_stages: int
    depth: int
    lam: float = 0.1
    delta: float = 0.75
    kappa: float = 0.01
    loss: LossKind = LossKind.POISSON

    def __post_init__(self) -> None:
        if self.n_stages < 1:
            raise ValueError("n_stages must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not (0.0 < self.lam <= 1.0):
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.loss is LossKind.SQUARED_ERROR:
            raise ValueError("boosting supports the poisson and gamma losses")


@dataclass
class Gbm:
    """A fitted boosting run: intercept, damped stages, training trace."""

    f0: float
    stages: list[Tree]
    features: tuple[FeatureSpec, ...]
    params: GbmParams
    seed: int
    trace: np.ndarray  # training deviance after 0..n_stages stages
    n_zero_steps: int  # leaves whose line search degenerated to a zero step

    @property
    def loss(self) -> LossKind:
        return self.params.loss

    def link_matrix(self, X: np.ndarray, n_stages: int | None = None) -> np.ndarray:
        """Link score ``f`` using the first ``n_stages`` stages (default all)."""
        k = len(self.stages) if n_stages is None else n_stages
        if not (0 <= k <= len(self.stages)):
            raise ValueError(f"n_stages must lie in [0, {len(self.stages)}]")
        f = np.full(X.shape[0], self.f0)
        for stage in self.stages[:k]:
            f += stage.predict_matrix(X)
        return f

    def predict_matrix(self, X: np.ndarray, n_stages: int | None = None) -> np.ndarray:
        return np.exp(self.link_matrix(X, n_stages))


def _intercept(loss: LossKind, y: np.ndarray, w: np.ndarray) -> float:
    """Link-scale constant minimizing the training deviance."""
    if loss is LossKind.POISSON:
        total = float(np.sum(y))
        if total <= 0:
            raise ValueError("cannot boost counts that are all zero")
        return float(np.log(total / np.sum(w)))
    return float(np.log(np.sum(y * w) / np.sum(w)))


def _line_search(loss: LossKind, y, w, f) -> tuple[float, bool]:
    """Optimal link step for one region; flags a degenerate (zero) step."""
    if loss is LossKind.POISSON:
        num = float(np.sum(y))
        den = float(np.sum(w * np.exp(f)))
    else:
        num = float(np.sum(w * y * np.exp(-f)))
        den = float(np.sum(w))
    if num <= 0 or den <= 0:
        return 0.0, True
    return float(np.log(num / den)), False


def fit_gbm(
    problem: RegressionProblem,
    params: GbmParams,
    seed: int,
    spawn_prefix: tuple[int, ...] = (),
) -> Gbm:
    """Run ``n_stages`` boosting iterations on ``problem``.

    ``spawn_prefix`` namespaces the per-stage seed derivation — stage ``t``
    uses ``SeedSequence(seed, spawn_key=spawn_prefix + (t,))`` — so runs of
    different lengths under the same prefix share their common stages.
    """
    if problem.loss is not params.loss:
        raise ValueError(f"problem loss {problem.loss} does not match params loss {params.loss}")
    X, y, w = problem.X, problem.y, problem.w
    n = problem.n
    f0 = _intercept(params.loss, y, w)
    f = np.full(n, f0)
    size = round(params.delta * n)
    stage_params = TreeParams(
        loss=LossKind.SQUARED_ERROR,
        cp=0.0,
        kappa=params.kappa,
        max_depth=params.depth,
    )

    stages: list[Tree] = []
    trace = [deviance(params.loss, y, np.exp(f), w)]
    n_zero = 0
    for t in range(params.n_stages):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=spawn_prefix + (t,)))
        rows = np.sort(rng.choice(n, size=size, replace=False))
        residual = negative_gradient(params.loss, y[rows], w[rows], f[rows])
        sub = RegressionProblem(
            loss=LossKind.SQUARED_ERROR,
            X=X[rows],
            features=problem.features,
            y=residual,
            w=np.ones(len(rows)),
        )
        stage = grow(sub, stage_params)
        leaves = stage.leaves()
        regions = stage.apply_matrix(X[rows])
        for k, leaf in enumerate(leaves):
            members = rows[regions == k]
            step, degenerate = _line_search(params.loss, y[members], w[members], f[members])
            if degenerate:
                n_zero += 1
            leaf.value = params.lam * step
        f += stage.predict_matrix(X)
        stages.append(stage)
        trace.append(deviance(params.loss, y, np.exp(f), w))

    return Gbm(
        f0=f0,
        stages=stages,
        features=problem.features,
        params=params,
        seed=seed,
        trace=np.asarray(trace),
        n_zero_steps=n_zero,
    )


def predict_gbm(gbm: Gbm, X: np.ndarray, n_stages: int | None = None) -> np.ndarray:
    """Response-scale predictions ``exp(f)`` from the first ``n_stages``."""
    return gbm.predict_matrix(X, n_stages)


def staged_deviance(gbm: Gbm, X: np.ndarray, y, w) -> np.ndarray:
    """Deviance of ``(y, w)`` after 0, 1, ..., ``n_stages`` stages.

    Grows the link score one stage at a time, so the whole sweep costs one
    pass over the stages rather than one full prediction per stage count.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    f = np.full(X.shape[0], gbm.f0)
    out = [deviance(gbm.loss, y, np.exp(f), w)]
    for stage in gbm.stages:
        f += stage.predict_matrix(X)
        out.append(deviance(gbm.loss, y, np.exp(f), w))
    return np.asarray(out)


def gbm_to_dict(g: Gbm) -> dict:
    return {
        "model": "gbm",
        "loss": g.loss.value,
        "seed": g.seed,
        "f0": g.f0,
        "params": {
            "n_stages": g.params.n_stages,
            "depth": g.params.depth,
            "lam": g.params.lam,
            "delta": g.params.delta,
            "kappa": g.params.kappa,
        },
        "features": schema_to_dict(g.features),
        "trace": [float(v) for v in g.trace],
        "n_zero_steps": g.n_zero_steps,
        "stages": [tree_to_dict(t) for t in g.stages],
    }


def gbm_from_dict(d: Mapping) -> Gbm:
    if d.get("model") != "gbm":
        raise ValueError("not a serialized boosting model")
    pd = d["params"]
    params = GbmParams(
        n_stages=int(pd["n_stages"]),
        depth=int(pd["depth"]),
        lam=float(pd["lam"]),
        delta=float(pd["delta"]),
        kappa=float(pd["kappa"]),
        loss=LossKind(d["loss"]),
    )
    return Gbm(
        f0=float(d["f0"]),
        stages=[tree_from_dict(td) for td in d["stages"]],
        features=schema_from_dict(d["features"]),
        params=params,
        seed=int(d["seed"]),
        trace=np.asarray(d["trace"], dtype=float),
        n_zero_steps=int(d["n_zero_steps"]),
    )
