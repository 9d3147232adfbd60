"""Hyper-parameter selection by k-fold cross-validation with inner validation.

For every held-out fold ``k`` the procedure scores each grid point by
training on the data without folds ``k`` and ``l`` and measuring mean
deviance on fold ``l``, averaged over every inner fold ``l != k``.  The
winning point — exact score ties broken towards the simpler model, then
enumeration order — is refit on everything except fold ``k`` and assessed
there, giving an honest per-fold generalization error.

Ensemble-size grids are swept in one pass per setting of the other axis:
fits extend stage for stage when only the size changes, so the largest size
is fit once and every smaller size is read off as a prefix.

Seed derivation: an inner fit for held-out fold ``k``, validation fold
``l`` and second-axis group ``g`` draws from
``SeedSequence(seed, spawn_key=(0, k, l, g, t))`` for tree/stage ``t``; the
per-fold refit uses ``spawn_key=(1, k, g, t)``.  Scores are therefore
reproducible and independent of sweep order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import FoldAssignment, RegressionProblem
from .forest import Forest, ForestParams, fit_forest
from .gbm import Gbm, GbmParams, fit_gbm
from .loss import LossKind, NodeShrinkage, deviance
from .tree import Tree, TreeParams, gated_predict, grow


def default_cp_grid() -> tuple[float, ...]:
    """271 cp values: mantissas 1.0–9.9 across three decades, then 0.01."""
    mantissas = [1.0 + 0.1 * i for i in range(90)]
    values = [m * 10.0**e for e in (-5, -4, -3) for m in mantissas]
    values.append(1e-2)
    return tuple(values)


def default_shrink_grid() -> tuple[float, ...]:
    """Shrinkage strengths 2**-6 through 2**0."""
    return tuple(2.0**-i for i in range(6, -1, -1))


def default_size_grid() -> tuple[int, ...]:
    """Ensemble sizes 100 through 5000 in steps of 100."""
    return tuple(range(100, 5001, 100))


def default_m_grid(p: int) -> tuple[int, ...]:
    """Per-node feature draws 1 through the number of features."""
    return tuple(range(1, p + 1))


def default_depth_grid() -> tuple[int, ...]:
    """Boosting tree depths 1 through 10."""
    return tuple(range(1, 11))


@dataclass(frozen=True)
class TuningGrid:
    """A model family with its two grid axes and fixed side parameters.

    Points enumerate the second axis outermost and the first axis fastest;
    ``points()[g * len(first) + i]`` pairs ``second[g]`` with ``first[i]``.
    """

    family: str  # "tree" | "forest" | "gbm"
    first_name: str
    first: tuple
    second_name: str
    second: tuple
    fixed: tuple[tuple[str, float], ...] = ()

    @classmethod
    def tree(cls, cp_values=None, shrink_values=None, kappa: float = 0.01) -> "TuningGrid":
        """Tree grid over the cp gate and the node-shrinkage strength.

        ``shrink_values=(None,)`` tunes cp alone with shrinkage disabled
        (the only choice for severity trees).
        """
        cp_values = default_cp_grid() if cp_values is None else tuple(cp_values)
        shrink_values = (
            default_shrink_grid() if shrink_values is None else tuple(shrink_values)
        )
        return cls("tree", "cp", cp_values, "shrink", shrink_values, (("kappa", kappa),))

    @classmethod
    def forest(
        cls,
        t_values=None,
        m_values=None,
        *,
        p: int | None = None,
        delta: float = 0.75,
        gamma: float = 0.25,
        kappa: float = 0.01,
    ) -> "TuningGrid":
        t_values = default_size_grid() if t_values is None else tuple(t_values)
        if m_values is None:
            if p is None:
                raise ValueError("forest grid needs m_values or the feature count p")
            m_values = default_m_grid(p)
        fixed = (("delta", delta), ("gamma", gamma), ("kappa", kappa))
        return cls("forest", "n_trees", t_values, "m", tuple(m_values), fixed)

    @classmethod
    def gbm(
        cls,
        t_values=None,
        d_values=None,
        *,
        lam: float = 0.1,
        delta: float = 0.75,
        kappa: float = 0.01,
    ) -> "TuningGrid":
        t_values = default_size_grid() if t_values is None else tuple(t_values)
        d_values = default_depth_grid() if d_values is None else tuple(d_values)
        fixed = (("delta", delta), ("kappa", kappa), ("lam", lam))
        return cls("gbm", "n_stages", t_values, "depth", tuple(d_values), fixed)

    def __post_init__(self) -> None:
        if self.family not in ("tree", "forest", "gbm"):
            raise ValueError(f"unknown model family {self.family!r}")
        if not self.first or not self.second:
            raise ValueError("grid axes must be non-empty")
        if self.family in ("forest", "gbm"):
            sizes = list(self.first)
            if sizes != sorted(sizes) or len(set(sizes)) != len(sizes) or sizes[0] < 1:
                raise ValueError("ensemble sizes must be distinct, ascending and >= 1")

    @property
    def fixed_dict(self) -> dict:
        return dict(self.fixed)

    def points(self) -> list[dict]:
        return [
            {self.first_name: f, self.second_name: s}
            for s in self.second
            for f in self.first
        ]


@dataclass
class CvReport:
    """Scores, per-fold winners, refit models and their held-out deviances."""

    family: str
    points: list[dict]
    fold_labels: tuple[int, ...]
    scores: np.ndarray  # (n_folds, n_points) mean validation deviance
    winners: list[int]  # per fold: index into points
    refits: list[object]  # per fold: model fit on everything except the fold
    holdout: np.ndarray  # (n_folds,) mean deviance of the refit on its fold

    def winner_params(self, fold_index: int) -> dict:
        return dict(self.points[self.winners[fold_index]])

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "points": self.points,
            "fold_labels": list(self.fold_labels),
            "scores": [[float(v) for v in row] for row in self.scores],
            "winners": [int(i) for i in self.winners],
            "winner_params": [self.winner_params(i) for i in range(len(self.winners))],
            "holdout": [float(v) for v in self.holdout],
        }


def _mean_deviance(loss: LossKind, y, pred, w) -> float:
    """Mean deviance per observation, extended to zero predictions.

    An unshrunk frequency tree can predict rate zero on a claim-free leaf.
    The deviance limit there is zero for claim-free validation rows and
    infinite as soon as one claim meets a zero rate, so such grid points
    score as infinitely bad instead of aborting the whole run.
    """
    n = len(y)
    if loss is not LossKind.SQUARED_ERROR:
        y = np.asarray(y, dtype=float)
        bad = np.asarray(pred) <= 0.0
        if np.any(bad):
            if np.any(y[bad] > 0):
                return float("inf")
            keep = ~bad
            if not np.any(keep):
                return 0.0
            return deviance(loss, y[keep], np.asarray(pred)[keep],
                            np.asarray(w, dtype=float)[keep]) / n
    return deviance(loss, y, pred, w) / n


def _tree_params(loss: LossKind, cp: float, shrink, kappa: float) -> TreeParams:
    shrinkage = NodeShrinkage.disabled() if shrink is None else NodeShrinkage(gamma=shrink)
    return TreeParams(loss=loss, cp=cp, kappa=kappa, shrinkage=shrinkage)


def _forest_params(loss: LossKind, n_trees: int, m: int, fixed: Mapping) -> ForestParams:
    return ForestParams(
        n_trees=int(n_trees),
        m=int(m),
        delta=fixed["delta"],
        gamma=fixed["gamma"],
        kappa=fixed["kappa"],
        loss=loss,
    )


def _gbm_params(loss: LossKind, n_stages: int, depth: int, fixed: Mapping) -> GbmParams:
    return GbmParams(
        n_stages=int(n_stages),
        depth=int(depth),
        lam=fixed["lam"],
        delta=fixed["delta"],
        kappa=fixed["kappa"],
        loss=loss,
    )


def _group_errors(
    grid: TuningGrid,
    group_index: int,
    train: RegressionProblem,
    Xv: np.ndarray,
    yv: np.ndarray,
    wv: np.ndarray,
    seed: int,
    spawn_prefix: tuple[int, ...],
    n_threads: int,
) -> np.ndarray:
    """Mean validation deviance along the first axis for one group value."""
    loss = train.loss
    fixed = grid.fixed_dict
    group_value = grid.second[group_index]
    out = np.empty(len(grid.first))

    if grid.family == "tree":
        base = grow(train, _tree_params(loss, 0.0, group_value, fixed["kappa"]))
        for i, cp in enumerate(grid.first):
            pred = gated_predict(base, Xv, cp * base.root_loss)
            out[i] = _mean_deviance(loss, yv, pred, wv)
        return out

    t_max = grid.first[-1]
    if grid.family == "forest":
        params = _forest_params(loss, t_max, group_value, fixed)
        model = fit_forest(train, params, seed, n_threads=n_threads, spawn_prefix=spawn_prefix)
        running = np.zeros(Xv.shape[0])
        checkpoints = {t: None for t in grid.first}
        for t, tree in enumerate(model.trees, start=1):
            running += tree.predict_matrix(Xv)
            if t in checkpoints:
                checkpoints[t] = _mean_deviance(loss, yv, running / t, wv)
        return np.asarray([checkpoints[t] for t in grid.first])

    params = _gbm_params(loss, t_max, group_value, fixed)
    model = fit_gbm(train, params, seed, spawn_prefix=spawn_prefix)
    f = np.full(Xv.shape[0], model.f0)
    checkpoints = {t: None for t in grid.first}
    for t, stage in enumerate(model.stages, start=1):
        f += stage.predict_matrix(Xv)
        if t in checkpoints:
            checkpoints[t] = _mean_deviance(loss, yv, np.exp(f), wv)
    return np.asarray([checkpoints[t] for t in grid.first])


def _pick_winner(grid: TuningGrid, points: list[dict], row: np.ndarray) -> int:
    best = row.min()
    candidates = [i for i in range(len(points)) if row[i] == best]
    if grid.family == "tree":
        simpler = lambda i: -points[i]["cp"]
    elif grid.family == "forest":
        simpler = lambda i: points[i]["n_trees"]
    else:
        simpler = lambda i: points[i]["depth"]
    return min(candidates, key=lambda i: (simpler(i), i))


def _refit(
    grid: TuningGrid,
    point: dict,
    train: RegressionProblem,
    seed: int,
    spawn_prefix: tuple[int, ...],
    n_threads: int,
):
    loss = train.loss
    fixed = grid.fixed_dict
    if grid.family == "tree":
        return grow(train, _tree_params(loss, point["cp"], point["shrink"], fixed["kappa"]))
    if grid.family == "forest":
        params = _forest_params(loss, point["n_trees"], point["m"], fixed)
        return fit_forest(train, params, seed, n_threads=n_threads, spawn_prefix=spawn_prefix)
    params = _gbm_params(loss, point["n_stages"], point["depth"], fixed)
    return fit_gbm(train, params, seed, spawn_prefix=spawn_prefix)


def _model_predict(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, (Tree, Forest, Gbm)):
        return model.predict_matrix(X)
    raise TypeError(f"cannot predict with {type(model).__name__}")


def run_cv(
    problem: RegressionProblem,
    folds: FoldAssignment,
    grid: TuningGrid,
    seed: int,
    n_threads: int = 1,
) -> CvReport:
    """Cross-validate ``grid`` on ``problem`` under the given fold labels."""
    labels = tuple(range(1, folds.k + 1))
    points = grid.points()
    n_first = len(grid.first)
    scores = np.zeros((folds.k, len(points)))
    winners: list[int] = []
    refits: list[object] = []
    holdout = np.zeros(folds.k)

    for ki, k in enumerate(labels):
        inner = [l for l in labels if l != k]
        acc = np.zeros(len(points))
        for l in inner:
            train = problem.subset(folds.rows_excluding(k, l))
            valid_rows = folds.rows(l)
            Xv = problem.X[valid_rows]
            yv = problem.y[valid_rows]
            wv = problem.w[valid_rows]
            for g in range(len(grid.second)):
                errs = _group_errors(
                    grid, g, train, Xv, yv, wv, seed, (0, k, l, g), n_threads
                )
                acc[g * n_first : (g + 1) * n_first] += errs
        scores[ki] = acc / len(inner)
        winner = _pick_winner(grid, points, scores[ki])
        winners.append(winner)
        g_star = winner // n_first
        refit_train = problem.subset(folds.rows_excluding(k))
        model = _refit(grid, points[winner], refit_train, seed, (1, k, g_star), n_threads)
        refits.append(model)
        test_rows = folds.rows(k)
        pred = _model_predict(model, problem.X[test_rows])
        holdout[ki] = _mean_deviance(
            problem.loss, problem.y[test_rows], pred, problem.w[test_rows]
        )

    return CvReport(
        family=grid.family,
        points=points,
        fold_labels=labels,
        scores=scores,
        winners=winners,
        refits=refits,
        holdout=holdout,
    )


def nested_t_errors(model, X: np.ndarray, y, w, t_values: Sequence[int]) -> np.ndarray:
    """Mean deviance of ensemble prefixes of sizes ``t_values``.

    Evaluates a fitted forest or boosting run at several sizes in one pass;
    ``t_values`` must be ascending and bounded by the fitted size.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    t_values = list(t_values)
    if not t_values:
        return np.empty(0)
    if t_values != sorted(set(t_values)) or t_values[0] < 1:
        raise ValueError("t_values must be distinct, ascending and >= 1")
    if isinstance(model, Forest):
        units = model.trees
    elif isinstance(model, Gbm):
        units = model.stages
    else:
        raise TypeError("nested size evaluation needs a forest or boosting model")
    if t_values[-1] > len(units):
        raise ValueError(f"t_values exceed the fitted size {len(units)}")

    out = []
    wanted = set(t_values)
    if isinstance(model, Forest):
        running = np.zeros(X.shape[0])
        for t, tree in enumerate(units, start=1):
            running += tree.predict_matrix(X)
            if t in wanted:
                out.append(_mean_deviance(model.loss, y, running / t, w))
            if t >= t_values[-1]:
                break
    else:
        f = np.full(X.shape[0], model.f0)
        for t, stage in enumerate(units, start=1):
            f += stage.predict_matrix(X)
            if t in wanted:
                out.append(_mean_deviance(model.loss, y, np.exp(f), w))
            if t >= t_values[-1]:
                break
    return np.asarray(out)
