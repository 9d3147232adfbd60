"""CART regression trees grown by recursive binary splitting.

Trees are grown under Poisson deviance (counts with exposure), gamma deviance
(severities with case weights) or squared error (boosting residuals).  A
split is kept only when its loss decrease clears ``cp`` times the root loss,
both children keep at least a ``kappa`` share of the root sample, and an
optional depth cap is respected.

Numeric rules send ``x <= c`` left with cut-offs at midpoints of consecutive
distinct values.  Categorical levels are first ordered by their weighted
response averages (ties lexicographic) and then scanned like a numeric axis,
so a rule is a subset of levels going left.  Ties between candidate splits
are broken towards the smaller feature index, then the smaller cut-off.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .data import FeatureSpec, RegressionProblem, encode_row, schema_from_dict, schema_to_dict
from .loss import LossKind, NodeShrinkage, deviance


@dataclass
class Leaf:
    """Terminal region: response-scale estimate, aggregate weight, row count."""

    value: float
    weight: float
    n: int


@dataclass
class Split:
    """Internal node: rule, loss decrease and the two child subtrees.

    ``value``/``weight``/``n`` record the estimate the node would carry as a
    leaf; they let a grown tree be evaluated under a stricter cp gate
    without regrowing (splits failing the gate collapse to their own leaf).
    """

    feature: int
    threshold: float | None
    left_levels: tuple[int, ...] | None
    improvement: float
    left: "Node"
    right: "Node"
    value: float | None = None
    weight: float | None = None
    n: int | None = None

    def __post_init__(self) -> None:
        if self.improvement <= 0:
            raise ValueError("split improvement must be positive")
        if (self.threshold is None) == (self.left_levels is None):
            raise ValueError("split rule must be numeric or categorical, not both")


Node = Leaf | Split


@dataclass(frozen=True)
class TreeParams:
    """Growth controls: loss, cp gate, minimum node share, optional depth cap."""

    loss: LossKind
    cp: float = 0.0
    kappa: float = 0.01
    max_depth: int | None = None
    shrinkage: NodeShrinkage = field(default_factory=NodeShrinkage.disabled)

    def __post_init__(self) -> None:
        if not (0.0 <= self.cp <= 1.0):
            raise ValueError(f"cp must lie in [0, 1], got {self.cp}")
        if not (0.0 < self.kappa < 1.0):
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.shrinkage.enabled and self.loss is not LossKind.POISSON:
            raise ValueError("node shrinkage applies to Poisson trees only")


@dataclass
class Tree:
    """A fitted tree plus the schema and root summaries needed to use it."""

    root: Node
    features: tuple[FeatureSpec, ...]
    params: TreeParams
    shrinkage: NodeShrinkage
    root_estimate: float
    root_loss: float
    n_root: int

    @property
    def loss(self) -> LossKind:
        return self.params.loss

    def predict_row(self, x: np.ndarray) -> float:
        node = self.root
        while isinstance(node, Split):
            if node.threshold is not None:
                go_left = x[node.feature] <= node.threshold
            else:
                go_left = int(x[node.feature]) in node.left_levels
            node = node.left if go_left else node.right
        return node.value

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        self._fill(self.root, X, np.arange(X.shape[0]), out, None)
        return out

    def apply_matrix(self, X: np.ndarray) -> np.ndarray:
        """Leaf index (depth-first order) reached by each row."""
        out = np.empty(X.shape[0], dtype=np.intp)
        leaf_ids = {id(leaf): i for i, leaf in enumerate(self.leaves())}
        self._fill(self.root, X, np.arange(X.shape[0]), out, leaf_ids)
        return out

    def _fill(self, node, X, rows, out, leaf_ids) -> None:
        if isinstance(node, Leaf):
            out[rows] = node.value if leaf_ids is None else leaf_ids[id(node)]
            return
        xj = X[rows, node.feature]
        if node.threshold is not None:
            mask = xj <= node.threshold
        else:
            mask = np.isin(xj.astype(np.int64), node.left_levels)
        self._fill(node.left, X, rows[mask], out, leaf_ids)
        self._fill(node.right, X, rows[~mask], out, leaf_ids)

    def leaves(self) -> list[Leaf]:
        found: list[Leaf] = []

        def walk(node: Node) -> None:
            if isinstance(node, Leaf):
                found.append(node)
            else:
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return found

    def splits(self) -> Iterator[Split]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Split):
                yield node
                stack.append(node.right)
                stack.append(node.left)

    def depth(self) -> int:
        def walk(node: Node) -> int:
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


def predict(t: Tree, x: Mapping[str, object]) -> float:
    """Response-scale prediction for one named feature mapping."""
    return t.predict_row(encode_row(t.features, x))


def gated_predict(t: Tree, X: np.ndarray, gate: float) -> np.ndarray:
    """Predictions of the tree truncated at a stricter acceptance gate.

    A split whose loss decrease does not strictly exceed ``gate`` collapses
    to its recorded node estimate.  Because the greedy search at any node is
    independent of the gate, this equals regrowing the tree with
    ``cp = gate / root_loss`` — the cheap way to sweep a cp grid.
    """
    out = np.empty(X.shape[0])

    def fill(node: Node, rows: np.ndarray) -> None:
        if isinstance(node, Split) and node.improvement <= gate:
            if node.value is None:
                raise ValueError("tree lacks node estimates; regrow to evaluate gates")
            out[rows] = node.value
            return
        if isinstance(node, Leaf):
            out[rows] = node.value
            return
        xj = X[rows, node.feature]
        if node.threshold is not None:
            mask = xj <= node.threshold
        else:
            mask = np.isin(xj.astype(np.int64), node.left_levels)
        fill(node.left, rows[mask])
        fill(node.right, rows[~mask])

    fill(t.root, np.arange(X.shape[0]))
    return out


# ---------------------------------------------------------------------------
# Split search


class _LossOps:
    """Sufficient statistics and profile losses for fast split scoring.

    Every node loss decomposes into a row-additive constant plus a profile
    term that depends only on the node's aggregate statistics ``(a, b)``;
    the constants cancel in any loss decrease, so candidate splits are scored
    on profiles alone.
    """

    def __init__(self, kind: LossKind, shrinkage: NodeShrinkage, y: np.ndarray, w: np.ndarray):
        self.kind = kind
        self.shrinkage = shrinkage
        if kind is LossKind.POISSON:
            self.a = y.astype(float)
            self.b = w.astype(float)
        else:
            self.a = (y * w).astype(float)
            self.b = w.astype(float)

    def estimate(self, sum_a: float, sum_b: float) -> float:
        if self.kind is LossKind.POISSON and self.shrinkage.enabled:
            if self.shrinkage.gamma == 0.0:
                return float(self.shrinkage.root_rate)
            g2 = self.shrinkage.gamma**-2
            return (g2 + sum_a) / (g2 / self.shrinkage.root_rate + sum_b)
        return sum_a / sum_b

    def profile(self, sum_a, sum_b):
        """Profile loss of a node with aggregates (sum_a, sum_b); vectorized."""
        sum_a = np.asarray(sum_a, dtype=float)
        sum_b = np.asarray(sum_b, dtype=float)
        if self.kind is LossKind.POISSON:
            if self.shrinkage.enabled:
                est = self._shrunken(sum_a, sum_b)
                return 2.0 * (-sum_a * np.log(est) - sum_a + est * sum_b)
            ratio = np.where(sum_a > 0, sum_a / sum_b, 1.0)
            return -2.0 * sum_a * np.log(ratio)
        if self.kind is LossKind.GAMMA:
            return 2.0 * sum_b * np.log(sum_a / sum_b)
        return -(sum_a * sum_a) / sum_b

    def _shrunken(self, sum_a, sum_b):
        if self.shrinkage.gamma == 0.0:
            return np.full_like(np.asarray(sum_a, dtype=float), self.shrinkage.root_rate)
        g2 = self.shrinkage.gamma**-2
        return (g2 + sum_a) / (g2 / self.shrinkage.root_rate + sum_b)


def _min_child_count(kappa: float, n_root: int) -> int:
    return max(1, math.ceil(kappa * n_root - 1e-9))


@dataclass
class _Candidate:
    gain: float
    feature: int
    threshold: float | None
    left_levels: tuple[int, ...] | None
    left_mask: np.ndarray  # over the node's rows, in node order


def _scan_numeric(xj, a_idx, b_idx, min_count, ops, profile_node):
    order = np.argsort(xj, kind="stable")
    xs = xj[order]
    if xs[0] == xs[-1]:
        return None
    a_pref = np.cumsum(a_idx[order])[:-1]
    b_pref = np.cumsum(b_idx[order])[:-1]
    n = len(xs)
    counts = np.arange(1, n)
    sum_a = float(np.sum(a_idx))
    sum_b = float(np.sum(b_idx))
    admissible = (xs[:-1] != xs[1:]) & (counts >= min_count) & (n - counts >= min_count)
    if not np.any(admissible):
        return None
    gains = profile_node - ops.profile(a_pref, b_pref) - ops.profile(sum_a - a_pref, sum_b - b_pref)
    gains[~admissible] = -np.inf
    pos = int(np.argmax(gains))
    if not np.isfinite(gains[pos]) or gains[pos] <= 0:
        return None
    cut = 0.5 * (xs[pos] + xs[pos + 1])
    if not (xs[pos] < cut < xs[pos + 1]):
        cut = float(xs[pos])
    return float(cut)


def _scan_categorical(codes, a_idx, b_idx, n_levels, level_names, min_count, ops, profile_node):
    counts = np.bincount(codes, minlength=n_levels)
    a_sum = np.bincount(codes, weights=a_idx, minlength=n_levels)
    b_sum = np.bincount(codes, weights=b_idx, minlength=n_levels)
    observed = np.flatnonzero(counts > 0)
    if len(observed) < 2:
        return None
    mean_of = {int(c): a_sum[c] / b_sum[c] for c in observed}
    ordered = np.asarray(sorted(observed, key=lambda c: (mean_of[int(c)], level_names[c])))
    a_pref = np.cumsum(a_sum[ordered])[:-1]
    b_pref = np.cumsum(b_sum[ordered])[:-1]
    c_pref = np.cumsum(counts[ordered])[:-1]
    total_a = float(np.sum(a_idx))
    total_b = float(np.sum(b_idx))
    total_c = len(codes)
    admissible = (c_pref >= min_count) & (total_c - c_pref >= min_count)
    if not np.any(admissible):
        return None
    gains = (
        profile_node - ops.profile(a_pref, b_pref) - ops.profile(total_a - a_pref, total_b - b_pref)
    )
    gains[~admissible] = -np.inf
    pos = int(np.argmax(gains))
    if not np.isfinite(gains[pos]) or gains[pos] <= 0:
        return None
    return tuple(sorted(int(c) for c in ordered[: pos + 1]))


def _search_node(X, idx, candidates, specs, ops, min_count) -> _Candidate | None:
    a_idx = ops.a[idx]
    b_idx = ops.b[idx]
    profile_node = float(ops.profile(float(np.sum(a_idx)), float(np.sum(b_idx))))
    best: _Candidate | None = None
    for j in candidates:
        xj = X[idx, j]
        spec = specs[j]
        if spec.is_categorical:
            rule = _scan_categorical(
                xj.astype(np.int64), a_idx, b_idx, len(spec.levels), spec.levels,
                min_count, ops, profile_node,
            )
            if rule is None:
                continue
            mask = np.isin(xj.astype(np.int64), rule)
            threshold, left_levels = None, rule
        else:
            rule = _scan_numeric(xj, a_idx, b_idx, min_count, ops, profile_node)
            if rule is None:
                continue
            mask = xj <= rule
            threshold, left_levels = rule, None
        # Rescore the feature's winner from aggregates taken in node-row order
        # so identical left sets found through different features tie bitwise.
        aL = float(np.sum(a_idx[mask]))
        bL = float(np.sum(b_idx[mask]))
        aR = float(np.sum(a_idx[~mask]))
        bR = float(np.sum(b_idx[~mask]))
        gain = profile_node - float(ops.profile(aL, bL)) - float(ops.profile(aR, bR))
        if gain <= 0:
            continue
        if best is None or gain > best.gain:
            best = _Candidate(gain, int(j), threshold, left_levels, mask)
    return best


def grow(
    problem: RegressionProblem,
    params: TreeParams,
    feature_sampler: Callable[[int], Sequence[int]] | None = None,
) -> Tree:
    """Grow a tree on ``problem``.

    ``feature_sampler``, when given, is called once per node (depth-first,
    left before right) and must return the candidate feature indices for that
    node — this is the hook ensemble fitting uses for per-node feature
    subsampling.

    A split is accepted only when its loss decrease strictly exceeds
    ``cp * root_loss``; at ``cp=1`` no split can clear its own root loss, so
    the tree stays a single leaf, and at ``cp=0`` growth continues until the
    ``kappa`` share or ``max_depth`` constraints bind.
    """
    if problem.loss is not params.loss:
        raise ValueError(f"problem loss {problem.loss} does not match params loss {params.loss}")
    X, y, w = problem.X, problem.y, problem.w
    n = problem.n

    shrinkage = params.shrinkage
    if params.loss is LossKind.POISSON and shrinkage.enabled and shrinkage.root_rate is None:
        root_rate = float(np.sum(y)) / float(np.sum(w))
        if root_rate > 0:
            shrinkage = shrinkage.resolved(root_rate)
        else:
            # a claim-free sample has no rate to shrink towards; the prior's
            # limit is zero everywhere, which the raw estimates already give
            shrinkage = NodeShrinkage.disabled()

    ops = _LossOps(params.loss, shrinkage, y, w)
    min_count = _min_child_count(params.kappa, n)
    root_estimate = ops.estimate(float(np.sum(ops.a)), float(np.sum(ops.b)))
    if params.loss is LossKind.POISSON and root_estimate == 0.0:
        # all counts zero: the deviance vanishes in the limit of rate -> 0
        root_loss = 0.0
    else:
        root_loss = deviance(params.loss, y, np.full(n, root_estimate), w)
    gate = params.cp * root_loss
    all_features = tuple(range(problem.p))

    def build(idx: np.ndarray, depth: int) -> Node:
        sum_a = float(np.sum(ops.a[idx]))
        sum_b = float(np.sum(ops.b[idx]))
        leaf = Leaf(value=ops.estimate(sum_a, sum_b), weight=sum_b, n=len(idx))
        if params.max_depth is not None and depth >= params.max_depth:
            return leaf
        if len(idx) < 2 * min_count:
            return leaf
        candidates = feature_sampler(problem.p) if feature_sampler else all_features
        found = _search_node(X, idx, candidates, specs=problem.features, ops=ops, min_count=min_count)
        if found is None or found.gain <= gate:
            return leaf
        left = build(idx[found.left_mask], depth + 1)
        right = build(idx[~found.left_mask], depth + 1)
        return Split(
            feature=found.feature,
            threshold=found.threshold,
            left_levels=found.left_levels,
            improvement=found.gain,
            left=left,
            right=right,
            value=leaf.value,
            weight=leaf.weight,
            n=leaf.n,
        )

    root = build(np.arange(n), 0)
    return Tree(
        root=root,
        features=problem.features,
        params=params,
        shrinkage=shrinkage,
        root_estimate=root_estimate,
        root_loss=root_loss,
        n_root=n,
    )


def best_split(
    problem: RegressionProblem,
    params: TreeParams,
    rows: Sequence[int] | None = None,
) -> Split | None:
    """Best admissible split of ``rows`` (default: all), or ``None``.

    The returned split carries the two fitted child leaves.  The ``cp`` gate
    and the ``kappa`` share are taken relative to the given rows, which play
    the role of the tree root here.
    """
    idx = np.arange(problem.n) if rows is None else np.asarray(rows)
    sub = problem.subset(idx)
    tree = grow(sub, TreeParams(
        loss=params.loss,
        cp=params.cp,
        kappa=params.kappa,
        max_depth=1,
        shrinkage=params.shrinkage,
    ))
    return tree.root if isinstance(tree.root, Split) else None


def order_categorical_levels(levels: Sequence[str], y, w, loss: LossKind) -> tuple[str, ...]:
    """Order levels by weighted response average, ties lexicographic.

    ``y``/``w`` are per-row responses and weights; ``levels`` the per-row
    level names.  Poisson averages counts over exposure; gamma and squared
    error average the response with its weight.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    names = np.asarray(levels, dtype=object)
    uniq = sorted(set(names))
    means = {}
    for name in uniq:
        mask = names == name
        total_w = float(np.sum(w[mask]))
        if total_w <= 0:
            raise ValueError(f"level {name!r} has no weight")
        if loss is LossKind.POISSON:
            means[name] = float(np.sum(y[mask])) / total_w
        else:
            means[name] = float(np.sum(y[mask] * w[mask])) / total_w
    return tuple(sorted(uniq, key=lambda s: (means[s], s)))


# ---------------------------------------------------------------------------
# Text export / parse


def _fmt(x: float) -> str:
    return repr(float(x))


def export_text(t: Tree) -> str:
    """Lossless printable listing: header, schema, then the indented nodes.

    The first child under a split is the left branch (rule true).  Parsing
    the text back with :func:`parse_text` reconstructs identical predictions.
    """
    lines = [
        f"{t.loss.value} tree: n={t.n_root} estimate={_fmt(t.root_estimate)} loss={_fmt(t.root_loss)}",
        f"features: {json.dumps(schema_to_dict(t.features))}",
    ]

    def walk(node: Node, depth: int) -> None:
        pad = "  " * depth
        if isinstance(node, Leaf):
            lines.append(
                f"{pad}leaf estimate={_fmt(node.value)} weight={_fmt(node.weight)} n={node.n}"
            )
            return
        spec = t.features[node.feature]
        if node.threshold is not None:
            rule = f"{json.dumps(spec.name)} <= {_fmt(node.threshold)}"
        else:
            names = [spec.levels[c] for c in node.left_levels]
            rule = f"{json.dumps(spec.name)} in {json.dumps(names)}"
        lines.append(f"{pad}split {rule} gain={_fmt(node.improvement)}")
        walk(node.left, depth + 1)
        walk(node.right, depth + 1)

    walk(t.root, 0)
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> Tree:
    """Rebuild a tree from :func:`export_text` output."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise ValueError("tree text must have a header, a schema and at least one node")
    header = lines[0]
    try:
        kind_word, rest = header.split(" tree: ", 1)
        loss = LossKind(kind_word)
        fields = dict(part.split("=", 1) for part in rest.split())
        n_root = int(fields["n"])
        root_estimate = float(fields["estimate"])
        root_loss = float(fields["loss"])
    except (ValueError, KeyError) as exc:
        raise ValueError(f"bad tree header {header!r}: {exc}") from None
    if not lines[1].startswith("features: "):
        raise ValueError("missing features line")
    features = schema_from_dict(json.loads(lines[1][len("features: "):]))
    feature_index = {s.name: j for j, s in enumerate(features)}

    decoder = json.JSONDecoder()
    parsed: list[tuple[int, dict]] = []
    for ln in lines[2:]:
        depth = (len(ln) - len(ln.lstrip(" "))) // 2
        body = ln.strip()
        if body.startswith("leaf "):
            fields = dict(part.split("=", 1) for part in body[len("leaf "):].split())
            parsed.append(
                (depth, {
                    "leaf": Leaf(
                        value=float(fields["estimate"]),
                        weight=float(fields["weight"]),
                        n=int(fields["n"]),
                    )
                })
            )
        elif body.startswith("split "):
            rest = body[len("split "):]
            name, end = decoder.raw_decode(rest)
            rest = rest[end:].strip()
            if rest.startswith("<= "):
                value_text, gain_text = rest[3:].rsplit(" gain=", 1)
                rule = {"threshold": float(value_text)}
            elif rest.startswith("in "):
                level_names, end2 = decoder.raw_decode(rest[3:])
                gain_text = rest[3 + end2:].strip()
                if not gain_text.startswith("gain="):
                    raise ValueError(f"bad split line {body!r}")
                gain_text = gain_text[len("gain="):]
                spec = features[feature_index[name]]
                rule = {"left_levels": tuple(sorted(spec.levels.index(lv) for lv in level_names))}
            else:
                raise ValueError(f"bad split rule in {body!r}")
            parsed.append(
                (depth, {"split": (feature_index[name], rule, float(gain_text))})
            )
        else:
            raise ValueError(f"unrecognised tree line {body!r}")

    pos = 0

    def build(depth: int) -> Node:
        nonlocal pos
        node_depth, payload = parsed[pos]
        if node_depth != depth:
            raise ValueError("inconsistent indentation in tree text")
        pos += 1
        if "leaf" in payload:
            return payload["leaf"]
        feature, rule, gain = payload["split"]
        left = build(depth + 1)
        right = build(depth + 1)
        return Split(
            feature=feature,
            threshold=rule.get("threshold"),
            left_levels=rule.get("left_levels"),
            improvement=gain,
            left=left,
            right=right,
        )

    root = build(0)
    if pos != len(parsed):
        raise ValueError("trailing nodes in tree text")
    params = TreeParams(loss=loss)
    return Tree(
        root=root,
        features=features,
        params=params,
        shrinkage=NodeShrinkage.disabled(),
        root_estimate=root_estimate,
        root_loss=root_loss,
        n_root=n_root,
    )


# ---------------------------------------------------------------------------
# JSON persistence


def _node_to_dict(node: Node, features) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": {"estimate": node.value, "weight": node.weight, "n": node.n}}
    spec = features[node.feature]
    rule: dict = {"feature": spec.name, "improvement": node.improvement}
    if node.threshold is not None:
        rule["threshold"] = node.threshold
    else:
        rule["left_levels"] = [spec.levels[c] for c in node.left_levels]
    return {
        "split": rule,
        "left": _node_to_dict(node.left, features),
        "right": _node_to_dict(node.right, features),
    }


def _node_from_dict(d: Mapping, features, feature_index) -> Node:
    if "leaf" in d:
        leaf = d["leaf"]
        return Leaf(value=float(leaf["estimate"]), weight=float(leaf["weight"]), n=int(leaf["n"]))
    rule = d["split"]
    j = feature_index[rule["feature"]]
    threshold = rule.get("threshold")
    left_levels = None
    if threshold is None:
        spec = features[j]
        left_levels = tuple(sorted(spec.levels.index(lv) for lv in rule["left_levels"]))
    return Split(
        feature=j,
        threshold=None if threshold is None else float(threshold),
        left_levels=left_levels,
        improvement=float(rule["improvement"]),
        left=_node_from_dict(d["left"], features, feature_index),
        right=_node_from_dict(d["right"], features, feature_index),
    )


def tree_to_dict(t: Tree) -> dict:
    return {
        "model": "tree",
        "loss": t.loss.value,
        "params": {
            "cp": t.params.cp,
            "kappa": t.params.kappa,
            "max_depth": t.params.max_depth,
            "shrinkage_gamma": t.params.shrinkage.gamma,
        },
        "shrinkage": {"gamma": t.shrinkage.gamma, "root_rate": t.shrinkage.root_rate},
        "features": schema_to_dict(t.features),
        "n_root": t.n_root,
        "root_estimate": t.root_estimate,
        "root_loss": t.root_loss,
        "root": _node_to_dict(t.root, t.features),
    }


def tree_from_dict(d: Mapping) -> Tree:
    if d.get("model") != "tree":
        raise ValueError("not a serialized tree")
    loss = LossKind(d["loss"])
    features = schema_from_dict(d["features"])
    feature_index = {s.name: j for j, s in enumerate(features)}
    shrink = d.get("shrinkage", {})
    shrinkage = NodeShrinkage(gamma=shrink.get("gamma"), root_rate=shrink.get("root_rate"))
    pd = d.get("params", {})
    params = TreeParams(
        loss=loss,
        cp=float(pd.get("cp", 0.0)),
        kappa=float(pd.get("kappa", 0.01)),
        max_depth=pd.get("max_depth"),
        shrinkage=NodeShrinkage(gamma=pd.get("shrinkage_gamma")),
    )
    return Tree(
        root=_node_from_dict(d["root"], features, feature_index),
        features=features,
        params=params,
        shrinkage=shrinkage,
        root_estimate=float(d["root_estimate"]),
        root_loss=float(d["root_loss"]),
        n_root=int(d["n_root"]),
    )
