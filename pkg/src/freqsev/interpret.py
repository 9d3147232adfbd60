"""Model-agnostic interpretation tools.

Variable importance sums each split's recorded loss decrease per feature
(averaged over the trees of an ensemble) and normalizes the totals to
percent.  Partial dependence, individual conditional expectations, grouped
partial dependence and the two-feature interaction statistic all evaluate
the fitted model on modified copies of observed rows, so they apply to any
of the model classes here — or to a plain callable on encoded matrices.

Everything is read-only: repeated calls return bitwise-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import FeatureSpec
from .forest import Forest
from .gbm import Gbm
from .tree import Tree


ModelLike = Tree | Forest | Gbm | Callable[[np.ndarray], np.ndarray]


def model_predictions(model: ModelLike, X: np.ndarray, scale: str = "response") -> np.ndarray:
    """Predictions of any supported model on an encoded matrix.

    ``scale="link"`` returns the additive score of a boosting model (other
    model classes have no link scale and raise); callables are evaluated
    as-is on either scale setting.
    """
    if scale not in ("response", "link"):
        raise ValueError(f"unknown prediction scale {scale!r}")
    if isinstance(model, Gbm):
        return model.link_matrix(X) if scale == "link" else model.predict_matrix(X)
    if isinstance(model, (Tree, Forest)):
        if scale == "link":
            raise ValueError("only boosting models expose a link scale")
        return model.predict_matrix(X)
    if callable(model):
        return np.asarray(model(X), dtype=float)
    raise TypeError(f"cannot predict with {type(model).__name__}")


def _model_features(model: ModelLike) -> tuple[FeatureSpec, ...] | None:
    return getattr(model, "features", None)


def _resolve_feature(model: ModelLike, feature: str | int) -> tuple[int, FeatureSpec | None]:
    specs = _model_features(model)
    if isinstance(feature, str):
        if specs is None:
            raise ValueError("named features need a model with a schema; pass an index")
        for j, spec in enumerate(specs):
            if spec.name == feature:
                return j, spec
        raise ValueError(f"unknown feature {feature!r}")
    j = int(feature)
    if specs is not None:
        if not (0 <= j < len(specs)):
            raise ValueError(f"feature index {j} out of range")
        return j, specs[j]
    return j, None


# ---------------------------------------------------------------------------
# Variable importance


@dataclass(frozen=True)
class ImportanceReport:
    """Per-feature split-gain totals, normalized to percent."""

    names: tuple[str, ...]
    share: np.ndarray  # percent; sums to 100 unless all raw gains are zero
    raw: np.ndarray

    def as_mapping(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, self.share)}


def _tree_gains(tree: Tree, p: int) -> np.ndarray:
    raw = np.zeros(p)
    for split in tree.splits():
        raw[split.feature] += split.improvement
    return raw


def variable_importance(model: Tree | Forest | Gbm) -> ImportanceReport:
    """Split-improvement importance; ensembles average the per-tree totals.

    Boosting stage trees are scored in the squared-error residual loss they
    were grown with — a split's decrease is only defined in the loss that
    chose it.
    """
    specs = _model_features(model)
    if specs is None:
        raise TypeError("importance needs a fitted tree, forest or boosting model")
    p = len(specs)
    if isinstance(model, Tree):
        raw = _tree_gains(model, p)
    elif isinstance(model, Forest):
        raw = np.mean([_tree_gains(t, p) for t in model.trees], axis=0)
    elif isinstance(model, Gbm):
        raw = np.mean([_tree_gains(t, p) for t in model.stages], axis=0)
    else:
        raise TypeError(f"cannot rank features of {type(model).__name__}")
    total = float(np.sum(raw))
    share = raw / total * 100.0 if total > 0 else np.zeros(p)
    return ImportanceReport(names=tuple(s.name for s in specs), share=share, raw=raw)


# ---------------------------------------------------------------------------
# Partial dependence and ICE


def default_grid(model: ModelLike, X: np.ndarray, feature: str | int, max_points: int = 100) -> np.ndarray:
    """Evaluation grid for one feature.

    Categorical: every schema level.  Continuous: the distinct observed
    values when there are at most ``max_points`` of them, otherwise
    ``max_points`` equally spaced quantiles of the observed distribution.
    """
    j, spec = _resolve_feature(model, feature)
    if spec is not None and spec.is_categorical:
        return np.arange(len(spec.levels), dtype=float)
    values = np.unique(X[:, j])
    if len(values) <= max_points:
        return values.astype(float)
    qs = np.linspace(0.0, 1.0, max_points)
    return np.unique(np.quantile(X[:, j], qs))


def _grid_labels(spec: FeatureSpec | None, grid: np.ndarray) -> tuple[str, ...]:
    if spec is not None and spec.is_categorical:
        return tuple(spec.levels[int(v)] for v in grid)
    return tuple(repr(float(v)) for v in grid)


@dataclass(frozen=True)
class IceBundle:
    """Per-observation curves: matrix[i, g] = prediction of row i at grid[g]."""

    feature: str
    grid: np.ndarray
    labels: tuple[str, ...]
    matrix: np.ndarray  # (n_rows, n_grid)
    rows: np.ndarray  # row indices the curves belong to
    scale: str


@dataclass(frozen=True)
class PdCurve:
    """Average effect of one feature: the mean of the ICE curves."""

    feature: str
    grid: np.ndarray
    labels: tuple[str, ...]
    values: np.ndarray
    extrapolated: np.ndarray  # grid values outside the observed range
    n_obs: int
    scale: str


def _resolve_rows(n: int, rows: Sequence[int] | None) -> np.ndarray:
    if rows is None:
        return np.arange(n)
    rows = np.asarray(rows, dtype=np.intp)
    if rows.size == 0:
        raise ValueError("empty observation set")
    return rows


def ice(
    model: ModelLike,
    X: np.ndarray,
    feature: str | int,
    grid: np.ndarray | None = None,
    rows: Sequence[int] | None = None,
    scale: str = "response",
) -> IceBundle:
    """Individual conditional expectations for one feature.

    Every selected observation is re-predicted with the feature forced to
    each grid value, the other columns kept at their observed values.
    """
    if X.shape[0] == 0:
        raise ValueError("empty data")
    j, spec = _resolve_feature(model, feature)
    rows = _resolve_rows(X.shape[0], rows)
    if grid is None:
        grid = default_grid(model, X, feature)
    grid = np.asarray(grid, dtype=float)
    base = X[rows].copy()
    matrix = np.empty((len(rows), len(grid)))
    for g, v in enumerate(grid):
        base[:, j] = v
        matrix[:, g] = model_predictions(model, base, scale)
    name = spec.name if spec is not None else f"x{j}"
    return IceBundle(
        feature=name,
        grid=grid,
        labels=_grid_labels(spec, grid),
        matrix=matrix,
        rows=rows,
        scale=scale,
    )


def partial_dependence(
    model: ModelLike,
    X: np.ndarray,
    feature: str | int,
    grid: np.ndarray | None = None,
    rows: Sequence[int] | None = None,
    scale: str = "response",
) -> PdCurve:
    """Partial dependence: the column means of the ICE matrix, exactly."""
    bundle = ice(model, X, feature, grid=grid, rows=rows, scale=scale)
    j, _ = _resolve_feature(model, feature)
    observed = X[:, j]
    extrapolated = (bundle.grid < observed.min()) | (bundle.grid > observed.max())
    return PdCurve(
        feature=bundle.feature,
        grid=bundle.grid,
        labels=bundle.labels,
        values=bundle.matrix.mean(axis=0),
        extrapolated=extrapolated,
        n_obs=len(bundle.rows),
        scale=scale,
    )


@dataclass(frozen=True)
class GroupedPd:
    """Within-group partial dependences, each shifted to start at zero.

    Parallel (identical) curves mean the grouping feature does not modify
    the effect; fanning curves reveal an interaction.
    """

    feature: str
    group_feature: str
    group_labels: tuple[str, ...]
    curves: tuple[PdCurve, ...]


def grouped_partial_dependence(
    model: ModelLike,
    X: np.ndarray,
    feature: str | int,
    group_feature: str | int,
    q: int = 5,
    grid: np.ndarray | None = None,
    rows: Sequence[int] | None = None,
    scale: str = "response",
) -> GroupedPd:
    """Partial dependence of ``feature`` within ``q`` groups of observations.

    Numeric grouping features split the rows into ``q`` equal-size groups by
    sorted value; categorical ones group by level and require at most ``q``
    observed levels.  Each curve is shifted so its first grid value is zero,
    making the shapes directly comparable.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    j, spec = _resolve_feature(model, feature)
    gj, gspec = _resolve_feature(model, group_feature)
    if gj == j:
        raise ValueError("grouping feature must differ from the curve feature")
    rows = _resolve_rows(X.shape[0], rows)
    if grid is None:
        grid = default_grid(model, X, feature)
    grid = np.asarray(grid, dtype=float)

    gvalues = X[rows, gj]
    if gspec is not None and gspec.is_categorical:
        observed = np.unique(gvalues.astype(np.int64))
        if len(observed) > q:
            raise ValueError(
                f"{gspec.name!r} has {len(observed)} observed levels, more than q={q}"
            )
        groups = [rows[gvalues.astype(np.int64) == code] for code in observed]
        labels = tuple(gspec.levels[int(code)] for code in observed)
    else:
        if len(rows) < q:
            raise ValueError(f"cannot form {q} groups from {len(rows)} observations")
        order = np.argsort(gvalues, kind="stable")
        chunks = np.array_split(rows[order], q)
        groups = list(chunks)
        labels = tuple(
            f"[{X[chunk, gj].min():g}, {X[chunk, gj].max():g}]" for chunk in chunks
        )
    gname = gspec.name if gspec is not None else f"x{gj}"

    curves = []
    for chunk in groups:
        pd = partial_dependence(model, X, feature, grid=grid, rows=chunk, scale=scale)
        curves.append(
            PdCurve(
                feature=pd.feature,
                grid=pd.grid,
                labels=pd.labels,
                values=pd.values - pd.values[0],
                extrapolated=pd.extrapolated,
                n_obs=pd.n_obs,
                scale=scale,
            )
        )
    return GroupedPd(
        feature=curves[0].feature,
        group_feature=gname,
        group_labels=labels,
        curves=tuple(curves),
    )


# ---------------------------------------------------------------------------
# Interaction strength


@dataclass(frozen=True)
class HResult:
    """Two-feature interaction strength on a [0, 1] scale."""

    feature_k: str
    feature_l: str
    h: float
    numerator: float
    denominator: float
    degenerate: bool
    n_obs: int
    scale: str


def _pd_at_observed(model, X_base, columns, values, scale) -> np.ndarray:
    """PD of ``columns`` evaluated at each observed value combination.

    ``values`` holds the per-row observed settings (n x len(columns)); the
    result is the mean prediction over all rows with those columns forced.
    Identical combinations are evaluated once and broadcast back.
    """
    combos, inverse = np.unique(values, axis=0, return_inverse=True)
    out = np.empty(len(combos))
    work = X_base.copy()
    for c, combo in enumerate(combos):
        for col, v in zip(columns, combo):
            work[:, col] = v
        out[c] = float(np.mean(model_predictions(model, work, scale)))
    return out[np.ravel(inverse)]


def h_statistic(
    model: ModelLike,
    X: np.ndarray,
    feature_k: str | int,
    feature_l: str | int,
    rows: Sequence[int] | None = None,
    scale: str = "response",
    tol: float = 1e-12,
) -> HResult:
    """Interaction strength of a feature pair.

    Computes the one-dimensional and two-way partial dependences at the
    observed points, centers each to mean zero over those evaluations, and
    returns the square root of the share of two-way variance not explained
    by the additive parts.  A denominator below ``tol`` (the model ignores
    the pair) yields 0 with ``degenerate=True``.
    """
    k, kspec = _resolve_feature(model, feature_k)
    l, lspec = _resolve_feature(model, feature_l)
    if k == l:
        raise ValueError("interaction needs two distinct features")
    rows = _resolve_rows(X.shape[0], rows)
    base = X[rows]
    if np.all(base[:, k] == base[0, k]) or np.all(base[:, l] == base[0, l]):
        raise ValueError("both features must vary in the data")

    pd_k = _pd_at_observed(model, base, (k,), base[:, (k,)], scale)
    pd_l = _pd_at_observed(model, base, (l,), base[:, (l,)], scale)
    pd_kl = _pd_at_observed(model, base, (k, l), base[:, (k, l)], scale)
    pd_k = pd_k - pd_k.mean()
    pd_l = pd_l - pd_l.mean()
    pd_kl = pd_kl - pd_kl.mean()

    num = float(np.sum((pd_kl - pd_k - pd_l) ** 2))
    den = float(np.sum(pd_kl**2))
    kname = kspec.name if kspec is not None else f"x{k}"
    lname = lspec.name if lspec is not None else f"x{l}"
    if den < tol:
        return HResult(kname, lname, 0.0, num, den, True, len(rows), scale)
    return HResult(kname, lname, float(np.sqrt(num / den)), num, den, False, len(rows), scale)
