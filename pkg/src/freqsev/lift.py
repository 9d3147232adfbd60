"""Tariff economics: technical premiums and model-lift comparisons.

A technical premium multiplies exposure, expected claim frequency and
expected claim severity.  Two competing tariffs are compared through the
relativity r = P_comp / P_bench per policy: sorting by r and binning with
equal exposure gives loss-ratio and double-lift tables, while the ordered
Lorenz curve (cumulative loss share against cumulative benchmark-premium
share) yields the Gini index — twice the area between the curve and the
diagonal, reported in percent.  Half the Gini is the average percentage
profit available to an insurer using the competing tariff to select risks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import PolicyRecord, Portfolio
from .interpret import model_predictions


@dataclass(frozen=True)
class TariffComparison:
    """Two premium vectors over one set of policies, with actual losses."""

    ids: tuple[str, ...]
    p_bench: np.ndarray
    p_comp: np.ndarray
    loss: np.ndarray
    exposure: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.ids)
        if n == 0:
            raise ValueError("empty comparison")
        for name in ("p_bench", "p_comp", "loss", "exposure"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError(f"{name} length {len(arr)} does not match {n} ids")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(self.p_bench <= 0) or np.any(self.p_comp <= 0):
            raise ValueError("premiums must be strictly positive")
        if np.any(self.loss < 0):
            raise ValueError("losses must be non-negative")
        if np.any(self.exposure <= 0):
            raise ValueError("exposures must be strictly positive")

    @property
    def r(self) -> np.ndarray:
        """Relativities P_comp / P_bench."""
        return self.p_comp / self.p_bench

    def order(self) -> np.ndarray:
        """Row order of ascending relativity, ties by policy id."""
        return np.lexsort((np.asarray(self.ids, dtype=object), self.r))


def technical_premium(freq_model, sev_model, policy: PolicyRecord) -> float:
    """Premium e * E(claim count per exposure) * E(claim size) for one policy."""
    x_f = np.asarray([_encode_for(freq_model, policy)])
    x_s = np.asarray([_encode_for(sev_model, policy)])
    freq = float(model_predictions(freq_model, x_f)[0])
    sev = float(model_predictions(sev_model, x_s)[0])
    return policy.expo * freq * sev


def _encode_for(model, policy: PolicyRecord) -> np.ndarray:
    from .data import encode_row

    features = getattr(model, "features", None)
    if features is None:
        raise TypeError("technical premiums need models with a feature schema")
    return encode_row(features, policy.features)


def technical_premiums(freq_model, sev_model, portfolio: Portfolio) -> np.ndarray:
    """Vectorized technical premiums for every policy of a portfolio."""
    X = portfolio.feature_matrix()
    freq = model_predictions(freq_model, X)
    sev = model_predictions(sev_model, X)
    return portfolio.exposures() * freq * sev


# ---------------------------------------------------------------------------
# Equal-exposure binning and lift tables


def equal_exposure_bins(exposures: Sequence[float], n_bins: int) -> np.ndarray:
    """Greedy bin labels (1-based) over policies already sorted by relativity.

    Policies join the current bin until its cumulative exposure reaches the
    bin's share of the total; every policy lands in exactly one bin.  A
    trailing bin that would receive no policies is an error — fewer bins
    must be requested for so skewed an exposure profile.
    """
    e = np.asarray(exposures, dtype=float)
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if len(e) < n_bins:
        raise ValueError(f"cannot form {n_bins} bins from {len(e)} policies")
    if np.any(e <= 0):
        raise ValueError("exposures must be strictly positive")
    total = float(np.sum(e))
    labels = np.empty(len(e), dtype=np.intp)
    current = 1
    cum = 0.0
    for i, ei in enumerate(e):
        labels[i] = current
        cum += ei
        if cum >= current * total / n_bins and current < n_bins:
            current += 1
    if labels[-1] != n_bins:
        raise ValueError(
            f"exposure too concentrated: bins {labels[-1] + 1}..{n_bins} would be empty"
        )
    return labels


@dataclass(frozen=True)
class LiftTable:
    """Per-bin aggregates of a tariff comparison, bins ordered by relativity.

    ``loss_ratio`` divides actual loss by benchmark premium.  The
    percentage errors divide each tariff's premium by actual loss, minus
    one; bins with zero actual loss cannot carry them and are listed in
    ``gaps`` (their entries are NaN).
    """

    n_bins: int
    bin_label: np.ndarray
    n_policies: np.ndarray
    exposure: np.ndarray
    r_low: np.ndarray
    r_high: np.ndarray
    r_mean: np.ndarray  # exposure-weighted
    loss: np.ndarray
    p_bench: np.ndarray
    p_comp: np.ndarray
    loss_ratio: np.ndarray
    pe_bench: np.ndarray
    pe_comp: np.ndarray
    avg_loss: np.ndarray  # per unit of exposure
    gaps: tuple[int, ...]


def _bin_table(cmp: TariffComparison, n_bins: int) -> LiftTable:
    order = cmp.order()
    labels = equal_exposure_bins(cmp.exposure[order], n_bins)
    r = cmp.r[order]
    e = cmp.exposure[order]
    loss = cmp.loss[order]
    pb = cmp.p_bench[order]
    pc = cmp.p_comp[order]

    def per_bin(agg, values):
        return np.asarray([agg(values[labels == b]) for b in range(1, n_bins + 1)])

    exposure = per_bin(np.sum, e)
    total_loss = per_bin(np.sum, loss)
    total_pb = per_bin(np.sum, pb)
    total_pc = per_bin(np.sum, pc)
    r_mean = np.asarray(
        [np.sum((r * e)[labels == b]) / np.sum(e[labels == b]) for b in range(1, n_bins + 1)]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        pe_bench = np.where(total_loss > 0, total_pb / total_loss - 1.0, np.nan)
        pe_comp = np.where(total_loss > 0, total_pc / total_loss - 1.0, np.nan)
    gaps = tuple(int(b) for b in range(1, n_bins + 1) if total_loss[b - 1] <= 0)
    return LiftTable(
        n_bins=n_bins,
        bin_label=np.arange(1, n_bins + 1),
        n_policies=per_bin(len, r),
        exposure=exposure,
        r_low=per_bin(np.min, r),
        r_high=per_bin(np.max, r),
        r_mean=r_mean,
        loss=total_loss,
        p_bench=total_pb,
        p_comp=total_pc,
        loss_ratio=total_loss / total_pb,
        pe_bench=pe_bench,
        pe_comp=pe_comp,
        avg_loss=total_loss / exposure,
        gaps=gaps,
    )


def loss_ratio_lift(cmp: TariffComparison, n_bins: int = 5) -> LiftTable:
    """Loss ratio against benchmark premium per equal-exposure relativity bin.

    A benchmark priced exactly at actual losses gives ratio 1 everywhere;
    ratios rising with relativity mean the competing tariff identifies
    policies the benchmark undercharges.
    """
    return _bin_table(cmp, n_bins)


def double_lift(cmp: TariffComparison, n_bins: int = 5) -> LiftTable:
    """Percentage error of both tariffs against actual loss per bin.

    The better tariff keeps premium/loss - 1 closest to zero across bins.
    Zero-loss bins are flagged in ``gaps`` rather than given a number.
    """
    return _bin_table(cmp, n_bins)


# ---------------------------------------------------------------------------
# Ordered Lorenz curve and Gini index


@dataclass(frozen=True)
class LorenzResult:
    """Ordered Lorenz curve points plus the Gini index (percent)."""

    loss_share: np.ndarray  # cumulative, starts at 0, ends at 1
    premium_share: np.ndarray  # cumulative benchmark share, same endpoints
    gini: float  # percent; twice the signed area between curve and diagonal
    profit: float  # percent; half the Gini
    method: str  # "trapezoid" or "step"


def ordered_lorenz_gini(cmp: TariffComparison, method: str = "trapezoid") -> LorenzResult:
    """Lorenz curve of losses against benchmark premiums, ordered by relativity.

    Policies sharing a relativity enter as one curve point.  The curve
    sagging below the diagonal means low-relativity policies carry less
    than their premium share of the losses — the competing tariff knows
    which policies the benchmark overprices.  ``method`` selects the area
    rule; the paper-scale default integrates the polyline by trapezoids.
    """
    if method not in ("trapezoid", "step"):
        raise ValueError(f"unknown integration method {method!r}")
    order = cmp.order()
    r = cmp.r[order]
    loss_cs = np.cumsum(cmp.loss[order])
    prem_cs = np.cumsum(cmp.p_bench[order])
    # normalizing by the running sums' own totals puts the last curve point
    # at exactly (1, 1), so a tariff scored against itself ginis to 0.0
    total_loss = float(loss_cs[-1])
    if total_loss <= 0:
        raise ValueError("total loss must be positive")
    boundaries = np.flatnonzero(r[:-1] != r[1:])  # last index of each tie group
    ends = np.concatenate([boundaries, [len(r) - 1]])
    loss_cum = loss_cs[ends] / total_loss
    prem_cum = prem_cs[ends] / float(prem_cs[-1])
    y = np.concatenate([[0.0], loss_cum])
    x = np.concatenate([[0.0], prem_cum])
    if method == "trapezoid":
        f = x - y
        area = float(np.sum(np.diff(x) * (f[:-1] + f[1:]) / 2.0))
    else:
        dx = np.diff(x)
        area = float(np.sum((x[1:] ** 2 - x[:-1] ** 2) / 2.0 - y[:-1] * dx))
    gini = 200.0 * area
    return LorenzResult(
        loss_share=y,
        premium_share=x,
        gini=gini,
        profit=gini / 2.0,
        method=method,
    )


@dataclass(frozen=True)
class GiniMatrix:
    """Pairwise Gini indices and the mini-max benchmark pick.

    Entry (b, c) scores competitor ``c`` against benchmark ``b``; the
    diagonal is not computed (NaN).  The mini-max tariff is the benchmark
    whose worst-case row entry is smallest — the hardest one to lift.
    """

    names: tuple[str, ...]
    matrix: np.ndarray  # (k, k), NaN diagonal
    minimax: str

    def row_max(self) -> np.ndarray:
        return np.nanmax(self.matrix, axis=1)


def gini_matrix(
    tariffs: Mapping[str, np.ndarray],
    loss: np.ndarray,
    exposure: np.ndarray,
    ids: Sequence[str] | None = None,
) -> GiniMatrix:
    """All benchmark-versus-competitor Gini indices for named premium vectors."""
    names = tuple(tariffs)
    if len(names) < 2:
        raise ValueError("need at least two tariffs")
    n = len(loss)
    if ids is None:
        width = len(str(n))
        ids = tuple(f"{i + 1:0{width}d}" for i in range(n))
    else:
        ids = tuple(ids)
    k = len(names)
    matrix = np.full((k, k), np.nan)
    for b, bench in enumerate(names):
        for c, comp in enumerate(names):
            if b == c:
                continue
            cmp = TariffComparison(
                ids=ids,
                p_bench=np.asarray(tariffs[bench], dtype=float),
                p_comp=np.asarray(tariffs[comp], dtype=float),
                loss=np.asarray(loss, dtype=float),
                exposure=np.asarray(exposure, dtype=float),
            )
            matrix[b, c] = ordered_lorenz_gini(cmp).gini
    row_max = np.nanmax(matrix, axis=1)
    minimax = names[int(np.argmin(row_max))]
    return GiniMatrix(names=names, matrix=matrix, minimax=minimax)
