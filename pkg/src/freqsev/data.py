"""Portfolio ingestion, learning views, fold assignment and simulation.

A portfolio is an ordered list of policy records (exposure, claim count,
claim amount, rating features).  Two learning views are derived from it:

* frequency: Poisson response = claim count, weight = exposure;
* severity: gamma response = average amount per claim, weight = claim count,
  restricted to policies that actually filed (and were paid for) claims.

Categorical features are kept verbatim as strings and encoded to level codes
only inside :class:`RegressionProblem`; an unseen level at prediction time is
an error, never a silent merge.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ID_COLUMNS = ("id", "expo", "nclaims", "amount")


@dataclass(frozen=True)
class FeatureSpec:
    """Declaration of one rating feature.

    A categorical feature carries a closed set of admissible string levels.
    Declaring a categorical with an empty level tuple marks the set as open:
    :func:`load_portfolio` fills it with the sorted observed values, and any
    use before that resolution treats every level as unseen.
    """

    name: str
    kind: str  # "continuous" | "categorical"
    levels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and self.levels:
            if len(self.levels) < 2:
                raise ValueError(f"feature {self.name!r}: categorical needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"feature {self.name!r}: duplicate levels")
        if self.kind == "continuous" and self.levels:
            raise ValueError(f"feature {self.name!r}: continuous feature cannot declare levels")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def code_of(self, value) -> int:
        try:
            return self.levels.index(str(value))
        except ValueError:
            raise ValueError(
                f"feature {self.name!r}: unseen level {value!r} (known: {', '.join(self.levels)})"
            ) from None


@dataclass(frozen=True)
class PolicyRecord:
    """One policyholder-year: identifiers, outcomes and rating features."""

    id: str
    expo: float
    nclaims: int
    amount: float
    features: Mapping[str, object]

    def validate(self) -> None:
        if not (0.0 < self.expo <= 1.0):
            raise ValueError(f"expo must lie in (0, 1], got {self.expo}")
        if self.nclaims < 0:
            raise ValueError(f"nclaims must be >= 0, got {self.nclaims}")
        if self.amount < 0:
            raise ValueError(f"amount must be >= 0, got {self.amount}")
        if self.amount > 0 and self.nclaims == 0:
            raise ValueError("positive amount with zero claims")


@dataclass(frozen=True)
class Portfolio:
    """Ordered policy records plus the feature schema they conform to."""

    records: tuple[PolicyRecord, ...]
    schema: tuple[FeatureSpec, ...]

    def __post_init__(self) -> None:
        names = [s.name for s in self.schema]
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names in schema")
        overlap = set(names) & set(ID_COLUMNS)
        if overlap:
            raise ValueError(f"feature names collide with reserved columns: {sorted(overlap)}")

    def __len__(self) -> int:
        return len(self.records)

    def validate(self) -> None:
        """Check every record against its own invariants and the schema."""
        for i, rec in enumerate(self.records, start=1):
            try:
                rec.validate()
                for spec in self.schema:
                    if spec.name not in rec.features:
                        raise ValueError(f"missing feature {spec.name!r}")
                    value = rec.features[spec.name]
                    if spec.is_categorical:
                        spec.code_of(value)
                    elif not math.isfinite(float(value)):
                        raise ValueError(f"feature {spec.name!r}: non-finite value {value!r}")
            except ValueError as exc:
                raise ValueError(f"row {i} (id={rec.id!r}): {exc}") from None

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    def exposures(self) -> np.ndarray:
        return np.array([r.expo for r in self.records], dtype=float)

    def claim_counts(self) -> np.ndarray:
        return np.array([r.nclaims for r in self.records], dtype=float)

    def amounts(self) -> np.ndarray:
        return np.array([r.amount for r in self.records], dtype=float)

    def feature_matrix(self) -> np.ndarray:
        """Encode all features to a float matrix (categoricals as level codes)."""
        n, p = len(self.records), len(self.schema)
        X = np.empty((n, p), dtype=float)
        for j, spec in enumerate(self.schema):
            if spec.is_categorical:
                code = {level: c for c, level in enumerate(spec.levels)}
                try:
                    X[:, j] = [code[str(r.features[spec.name])] for r in self.records]
                except KeyError as exc:
                    raise ValueError(
                        f"feature {spec.name!r}: unseen level {exc.args[0]!r}"
                    ) from None
            else:
                X[:, j] = [float(r.features[spec.name]) for r in self.records]
        return X


@dataclass(frozen=True)
class RegressionProblem:
    """A learning view: encoded feature matrix, response, weight, loss kind."""

    loss: "LossKind"
    X: np.ndarray
    features: tuple[FeatureSpec, ...]
    y: np.ndarray
    w: np.ndarray
    ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        from .loss import LossKind

        if self.X.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        n = self.X.shape[0]
        if n == 0:
            raise ValueError("empty problem")
        if self.X.shape[1] != len(self.features):
            raise ValueError("feature matrix width does not match schema")
        if len(self.y) != n or len(self.w) != n:
            raise ValueError("response/weight length does not match feature matrix")
        if np.any(self.w <= 0):
            raise ValueError("weights must be strictly positive")
        if self.loss is LossKind.GAMMA and np.any(self.y <= 0):
            raise ValueError("gamma responses must be strictly positive")
        if self.ids and len(self.ids) != n:
            raise ValueError("ids length does not match feature matrix")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "RegressionProblem":
        """Row-indexed sub-problem (bootstrap draws may repeat rows)."""
        rows = np.asarray(rows)
        ids = tuple(np.asarray(self.ids, dtype=object)[rows]) if self.ids else ()
        return RegressionProblem(
            loss=self.loss,
            X=self.X[rows],
            features=self.features,
            y=self.y[rows],
            w=self.w[rows],
            ids=ids,
        )

    def encode_row(self, values: Mapping[str, object]) -> np.ndarray:
        return encode_row(self.features, values)


def encode_row(features: Sequence[FeatureSpec], values: Mapping[str, object]) -> np.ndarray:
    """Encode one named feature mapping into the model's column layout."""
    x = np.empty(len(features), dtype=float)
    for j, spec in enumerate(features):
        if spec.name not in values:
            raise ValueError(f"missing feature {spec.name!r}")
        v = values[spec.name]
        x[j] = spec.code_of(v) if spec.is_categorical else float(v)
    return x


@dataclass(frozen=True)
class FoldAssignment:
    """Fold labels 1..k, one per record, sizes differing by at most one."""

    k: int
    labels: np.ndarray

    def __post_init__(self) -> None:
        counts = np.bincount(self.labels, minlength=self.k + 1)[1:]
        if len(counts) != self.k or np.any(counts == 0):
            raise ValueError("every fold index in 1..k must appear")
        if counts.max() - counts.min() > 1:
            raise ValueError("fold sizes differ by more than one")

    def rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.labels == fold)

    def rows_excluding(self, *folds: int) -> np.ndarray:
        return np.flatnonzero(~np.isin(self.labels, folds))


def load_portfolio(path, schema: Sequence[FeatureSpec]) -> Portfolio:
    """Read a portfolio CSV (columns id,expo,nclaims,amount + declared features).

    Validation failures name the offending data row (1-based, header
    excluded).  Categorical declarations with an empty level list have their
    levels inferred as the sorted set of observed values.
    """
    schema = tuple(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        expected = set(ID_COLUMNS) | {s.name for s in schema}
        got = set(reader.fieldnames)
        missing = expected - got
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        extra = got - expected
        if extra:
            raise ValueError(f"{path}: undeclared columns {sorted(extra)}")
        raw_rows = list(reader)

    # Infer level sets for categorical features declared without levels.
    resolved: list[FeatureSpec] = []
    for spec in schema:
        if spec.is_categorical and not spec.levels:
            observed = sorted({row[spec.name] for row in raw_rows})
            resolved.append(FeatureSpec(spec.name, "categorical", tuple(observed)))
        else:
            resolved.append(spec)

    records = []
    for i, row in enumerate(raw_rows, start=1):
        try:
            expo = float(row["expo"])
            amount = float(row["amount"])
            try:
                nclaims = int(row["nclaims"])
            except ValueError:
                raise ValueError(f"unparseable nclaims {row['nclaims']!r}") from None
            features = {}
            for spec in resolved:
                cell = row[spec.name]
                if spec.is_categorical:
                    spec.code_of(cell)
                    features[spec.name] = cell
                else:
                    value = float(cell)
                    if not math.isfinite(value):
                        raise ValueError(f"feature {spec.name!r}: non-finite value {cell!r}")
                    features[spec.name] = value
            rec = PolicyRecord(
                id=row["id"], expo=expo, nclaims=nclaims, amount=amount, features=features
            )
            rec.validate()
        except ValueError as exc:
            raise ValueError(f"{path}: row {i}: {exc}") from None
        records.append(rec)
    return Portfolio(records=tuple(records), schema=tuple(resolved))


def frequency_view(p: Portfolio) -> RegressionProblem:
    """Poisson claim-count view: response = nclaims, weight = exposure."""
    from .loss import LossKind

    if len(p) == 0:
        raise ValueError("empty problem")
    return RegressionProblem(
        loss=LossKind.POISSON,
        X=p.feature_matrix(),
        features=p.schema,
        y=p.claim_counts(),
        w=p.exposures(),
        ids=p.ids(),
    )


def severity_view(p: Portfolio) -> RegressionProblem:
    """Gamma severity view: response = amount/nclaims, weight = nclaims.

    Only policies with at least one claim and a positive total amount carry
    severity information; claims settled at zero cost are dropped alongside
    the claim-free rows.
    """
    from .loss import LossKind

    keep = [r for r in p.records if r.nclaims > 0 and r.amount > 0]
    if not keep:
        raise ValueError("no rows with positive claim amounts: severity view is empty")
    sub = Portfolio(records=tuple(keep), schema=p.schema)
    return RegressionProblem(
        loss=LossKind.GAMMA,
        X=sub.feature_matrix(),
        features=p.schema,
        y=sub.amounts() / sub.claim_counts(),
        w=sub.claim_counts(),
        ids=sub.ids(),
    )


def stratified_folds(p: Portfolio, k: int, seed: int) -> FoldAssignment:
    """Assign records to k folds, stratified on claim behaviour.

    Records are ordered by claim rate (nclaims/expo), then by severity
    (amount/nclaims, 0 for claim-free rows); ties are shuffled with the
    seeded generator so file order cannot leak into folds.  The ordered
    records are then dealt round-robin to folds 1..k, which balances the
    per-fold aggregate claim rates.
    """
    n = len(p)
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} records into {k} folds")
    nclaims = p.claim_counts()
    freq = nclaims / p.exposures()
    with np.errstate(invalid="ignore", divide="ignore"):
        sev = np.where(nclaims > 0, p.amounts() / np.maximum(nclaims, 1), 0.0)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    tiebreak = rng.random(n)
    order = np.lexsort((tiebreak, sev, freq))
    labels = np.empty(n, dtype=int)
    labels[order] = np.arange(n) % k + 1
    return FoldAssignment(k=k, labels=labels)


# ---------------------------------------------------------------------------
# Simulation


@dataclass(frozen=True)
class SimTerm:
    """One additive term of a log-linear surface.

    kind:
      * ``linear``     coef * x
      * ``quadratic``  coef * x^2
      * ``sine``       coef * sin(x)
      * ``product``    coef * x * x2   (an interaction)
      * ``level``      coef * 1[x == level]   (categorical offset)
    """

    kind: str
    feature: str
    coef: float
    feature2: str = ""
    level: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "quadratic", "sine", "product", "level"):
            raise ValueError(f"unknown term kind {self.kind!r}")
        if not math.isfinite(self.coef):
            raise ValueError(f"non-finite coefficient for {self.feature!r}")
        if self.kind == "product" and not self.feature2:
            raise ValueError("product term needs feature2")
        if self.kind == "level" and not self.level:
            raise ValueError("level term needs a level")


@dataclass(frozen=True)
class Surface:
    """Log-linear predictor: intercept plus additive terms."""

    intercept: float
    terms: tuple[SimTerm, ...] = ()

    def __post_init__(self) -> None:
        if not math.isfinite(self.intercept):
            raise ValueError("non-finite intercept")

    def evaluate(self, columns: Mapping[str, Sequence]) -> np.ndarray:
        """Linear predictor eta over named raw feature columns."""
        first = next(iter(columns.values()))
        eta = np.full(len(first), self.intercept, dtype=float)
        for t in self.terms:
            if t.kind == "level":
                x = np.asarray(columns[t.feature], dtype=object)
                eta += t.coef * (x == t.level)
                continue
            x = np.asarray(columns[t.feature], dtype=float)
            if t.kind == "linear":
                eta += t.coef * x
            elif t.kind == "quadratic":
                eta += t.coef * x * x
            elif t.kind == "sine":
                eta += t.coef * np.sin(x)
            elif t.kind == "product":
                x2 = np.asarray(columns[t.feature2], dtype=float)
                eta += t.coef * x * x2
        return eta


@dataclass(frozen=True)
class SimFeature:
    """Sampling recipe for one feature: uniform continuous or categorical draw."""

    name: str
    low: float = 0.0
    high: float = 1.0
    levels: tuple[str, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.levels:
            if self.probs and len(self.probs) != len(self.levels):
                raise ValueError(f"feature {self.name!r}: probs/levels length mismatch")
            if self.probs and not math.isclose(sum(self.probs), 1.0, abs_tol=1e-9):
                raise ValueError(f"feature {self.name!r}: probs must sum to 1")
        elif not (math.isfinite(self.low) and math.isfinite(self.high) and self.low < self.high):
            raise ValueError(f"feature {self.name!r}: invalid continuous range")

    @property
    def is_categorical(self) -> bool:
        return bool(self.levels)

    def to_spec(self) -> FeatureSpec:
        if self.is_categorical:
            return FeatureSpec(self.name, "categorical", tuple(self.levels))
        return FeatureSpec(self.name, "continuous")


@dataclass(frozen=True)
class SimConfig:
    """Full recipe for a synthetic portfolio.

    Claim counts are Poisson with mean ``expo * exp(eta_freq(x))``; claim
    amounts are sums of per-claim gamma draws with mean ``exp(eta_sev(x))``
    and fixed shape ``sev_shape``.
    """

    n: int
    features: tuple[SimFeature, ...]
    freq_surface: Surface
    sev_surface: Surface
    sev_shape: float = 2.0
    expo_low: float = 1.0
    expo_high: float = 1.0

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.sev_shape <= 0:
            raise ValueError("sev_shape must be positive")
        if not (0.0 < self.expo_low <= self.expo_high <= 1.0):
            raise ValueError("exposure range must satisfy 0 < low <= high <= 1")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("duplicate simulated feature names")


@dataclass(frozen=True)
class SimTruth:
    """The true surfaces behind a simulated portfolio, for oracle checks."""

    freq_surface: Surface
    sev_surface: Surface
    sev_shape: float


def simulate_portfolio(cfg: SimConfig, seed: int) -> tuple[Portfolio, SimTruth]:
    """Draw a portfolio from ``cfg``; deterministic given ``seed``.

    Draw order is fixed: features in declared order, then exposures, then
    claim counts, then claim amounts for the claim-bearing rows.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = cfg.n

    columns: dict[str, np.ndarray] = {}
    for f in cfg.features:
        if f.is_categorical:
            probs = np.asarray(f.probs, dtype=float) if f.probs else None
            columns[f.name] = rng.choice(np.asarray(f.levels, dtype=object), size=n, p=probs)
        else:
            columns[f.name] = rng.uniform(f.low, f.high, size=n)

    if cfg.expo_low == cfg.expo_high:
        expo = np.full(n, cfg.expo_low)
    else:
        expo = rng.uniform(cfg.expo_low, cfg.expo_high, size=n)

    rate = np.exp(cfg.freq_surface.evaluate(columns))
    nclaims = rng.poisson(expo * rate)

    amount = np.zeros(n)
    pos = np.flatnonzero(nclaims > 0)
    if len(pos):
        sev_mean = np.exp(cfg.sev_surface.evaluate({k: v[pos] for k, v in columns.items()}))
        shape = nclaims[pos] * cfg.sev_shape
        amount[pos] = rng.gamma(shape=shape, scale=sev_mean / cfg.sev_shape)

    width = len(str(n))
    records = tuple(
        PolicyRecord(
            id=f"{i + 1:0{width}d}",
            expo=float(expo[i]),
            nclaims=int(nclaims[i]),
            amount=float(amount[i]),
            features={f.name: columns[f.name][i] for f in cfg.features},
        )
        for i in range(n)
    )
    schema = tuple(f.to_spec() for f in cfg.features)
    truth = SimTruth(cfg.freq_surface, cfg.sev_surface, cfg.sev_shape)
    return Portfolio(records=records, schema=schema), truth


# ---------------------------------------------------------------------------
# JSON (de)serialization of schemas and simulation configs


def schema_to_dict(schema: Sequence[FeatureSpec]) -> list[dict]:
    return [
        {"name": s.name, "kind": s.kind, **({"levels": list(s.levels)} if s.levels else {})}
        for s in schema
    ]


def schema_from_dict(items: Iterable[Mapping]) -> tuple[FeatureSpec, ...]:
    return tuple(
        FeatureSpec(d["name"], d["kind"], tuple(d.get("levels", ()))) for d in items
    )


def sim_config_to_dict(cfg: SimConfig) -> dict:
    def surface(s: Surface) -> dict:
        return {
            "intercept": s.intercept,
            "terms": [
                {
                    "kind": t.kind,
                    "feature": t.feature,
                    "coef": t.coef,
                    **({"feature2": t.feature2} if t.feature2 else {}),
                    **({"level": t.level} if t.level else {}),
                }
                for t in s.terms
            ],
        }

    return {
        "n": cfg.n,
        "features": [
            {
                "name": f.name,
                **(
                    {"levels": list(f.levels), **({"probs": list(f.probs)} if f.probs else {})}
                    if f.is_categorical
                    else {"low": f.low, "high": f.high}
                ),
            }
            for f in cfg.features
        ],
        "freq_surface": surface(cfg.freq_surface),
        "sev_surface": surface(cfg.sev_surface),
        "sev_shape": cfg.sev_shape,
        "expo_low": cfg.expo_low,
        "expo_high": cfg.expo_high,
    }


def sim_config_from_dict(d: Mapping) -> SimConfig:
    def surface(sd: Mapping) -> Surface:
        terms = tuple(
            SimTerm(
                kind=t["kind"],
                feature=t["feature"],
                coef=float(t["coef"]),
                feature2=t.get("feature2", ""),
                level=t.get("level", ""),
            )
            for t in sd.get("terms", ())
        )
        return Surface(intercept=float(sd["intercept"]), terms=terms)

    features = tuple(
        SimFeature(
            name=f["name"],
            low=float(f.get("low", 0.0)),
            high=float(f.get("high", 1.0)),
            levels=tuple(f.get("levels", ())),
            probs=tuple(f.get("probs", ())),
        )
        for f in d["features"]
    )
    return SimConfig(
        n=int(d["n"]),
        features=features,
        freq_surface=surface(d["freq_surface"]),
        sev_surface=surface(d["sev_surface"]),
        sev_shape=float(d.get("sev_shape", 2.0)),
        expo_low=float(d.get("expo_low", 1.0)),
        expo_high=float(d.get("expo_high", 1.0)),
    )
