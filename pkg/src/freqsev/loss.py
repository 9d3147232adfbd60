"""Deviance losses, gradients and constant-fit node estimates.

Claim counts are scored with the Poisson deviance where the mean of row i is
``e_i * mu_i`` (exposure times a per-unit-of-exposure rate).  Claim severities
are scored with the gamma deviance where the claim count acts as a case
weight.  A squared-error variant exists only to fit the residual trees inside
gradient boosting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LossKind(enum.Enum):
    """Loss family used to grow a tree or boost an ensemble."""

    POISSON = "poisson"
    GAMMA = "gamma"
    SQUARED_ERROR = "squared_error"


@dataclass(frozen=True)
class NodeShrinkage:
    """Gamma-prior shrinkage applied to Poisson node rates.

    ``gamma`` is the coefficient of variation of a gamma prior placed on the
    node rate; it pulls small-node estimates towards ``root_rate``, the rate
    of the root sample the tree is grown on.  ``gamma=None`` means the prior
    is disabled (the infinite-gamma limit) and node rates are plain sums of
    counts over sums of exposure.  ``root_rate=None`` means "fill in the root
    rate of whatever sample the tree is grown on" and is resolved at fit
    time.
    """

    gamma: float | None
    root_rate: float | None = None

    def __post_init__(self) -> None:
        if self.gamma is not None and self.gamma < 0:
            raise ValueError(f"shrinkage gamma must be >= 0, got {self.gamma}")
        if self.root_rate is not None and self.root_rate <= 0:
            raise ValueError(f"root_rate must be > 0, got {self.root_rate}")

    @classmethod
    def disabled(cls) -> "NodeShrinkage":
        """No prior: node estimates are raw occurrence rates."""
        return cls(gamma=None)

    @property
    def enabled(self) -> bool:
        return self.gamma is not None

    def resolved(self, root_rate: float) -> "NodeShrinkage":
        """Return a copy with ``root_rate`` filled in (kept if already set)."""
        if not self.enabled or self.root_rate is not None:
            return self
        return NodeShrinkage(gamma=self.gamma, root_rate=root_rate)


def _as_vector(name: str, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _check_lengths(**vectors: np.ndarray) -> None:
    lengths = {name: len(v) for name, v in vectors.items()}
    if len(set(lengths.values())) > 1:
        raise ValueError(f"length mismatch: {lengths}")


def poisson_deviance(y, mu, e) -> float:
    """Poisson deviance of counts ``y`` against means ``e*mu``.

    Parameters
    ----------
    y : array-like
        Observed claim counts, >= 0.
    mu : array-like
        Predicted rates per unit of exposure, > 0.
    e : array-like
        Exposures, > 0.

    Returns
    -------
    float
        ``2 * sum(y*ln(y/(e*mu)) - (y - e*mu))`` with ``0*ln(0) := 0``.
        Non-negative; zero exactly when ``y == e*mu`` everywhere.
    """
    y, mu, e = _as_vector("y", y), _as_vector("mu", mu), _as_vector("e", e)
    _check_lengths(y=y, mu=mu, e=e)
    if np.any(y < 0):
        raise ValueError("counts must be non-negative")
    if np.any(mu <= 0):
        raise ValueError("rates must be strictly positive")
    if np.any(e <= 0):
        raise ValueError("exposures must be strictly positive")
    mean = e * mu
    terms = mean - y
    pos = y > 0
    terms[pos] += y[pos] * np.log(y[pos] / mean[pos])
    return 2.0 * float(np.sum(terms))


def gamma_deviance(y, mu, w) -> float:
    """Gamma deviance of positive responses ``y`` with case weights ``w``.

    Parameters
    ----------
    y : array-like
        Observed responses (average claim amounts), > 0.
    mu : array-like
        Predicted means, > 0.
    w : array-like
        Case weights (claim counts for severity data), > 0.

    Returns
    -------
    float
        ``2 * sum(w * ((y - mu)/mu - ln(y/mu)))``; non-negative, zero exactly
        at ``y == mu``.
    """
    y, mu, w = _as_vector("y", y), _as_vector("mu", mu), _as_vector("w", w)
    _check_lengths(y=y, mu=mu, w=w)
    if np.any(y <= 0) or np.any(mu <= 0) or np.any(w <= 0):
        raise ValueError("gamma deviance requires strictly positive y, mu and w")
    return 2.0 * float(np.sum(w * ((y - mu) / mu - np.log(y / mu))))


def squared_error(y, mu, w) -> float:
    """Weighted squared-error loss ``sum(w * (y - mu)^2)``."""
    y, mu, w = _as_vector("y", y), _as_vector("mu", mu), _as_vector("w", w)
    _check_lengths(y=y, mu=mu, w=w)
    return float(np.sum(w * (y - mu) ** 2))


def deviance(kind: LossKind, y, mu, w) -> float:
    """Dispatch to the deviance of ``kind`` with its weight semantics."""
    if kind is LossKind.POISSON:
        return poisson_deviance(y, mu, w)
    if kind is LossKind.GAMMA:
        return gamma_deviance(y, mu, w)
    if kind is LossKind.SQUARED_ERROR:
        return squared_error(y, mu, w)
    raise ValueError(f"unknown loss kind: {kind!r}")


def poisson_node_estimate(N, e, s: NodeShrinkage) -> float:
    """Rate estimate for a node holding counts ``N`` and exposures ``e``.

    With the prior disabled this is the raw rate ``sum(N)/sum(e)``.  With a
    finite coefficient of variation ``gamma`` the estimate is

        (gamma^-2 + sum(N)) / (gamma^-2 / root_rate + sum(e))

    which stays strictly positive even for claim-free nodes and tends to
    ``root_rate`` as ``gamma`` goes to 0.
    """
    N, e = _as_vector("N", N), _as_vector("e", e)
    _check_lengths(N=N, e=e)
    sum_n = float(np.sum(N))
    sum_e = float(np.sum(e))
    if sum_e <= 0:
        raise ValueError("node has no exposure")
    if not s.enabled:
        return sum_n / sum_e
    if s.root_rate is None:
        raise ValueError("shrinkage root_rate is unset; resolve it before estimating")
    if s.gamma == 0.0:
        return s.root_rate
    g2 = s.gamma**-2
    return (g2 + sum_n) / (g2 / s.root_rate + sum_e)


def gamma_node_estimate(y, w) -> float:
    """Weighted mean ``sum(y*w)/sum(w)`` — the total loss over the total count."""
    y, w = _as_vector("y", y), _as_vector("w", w)
    _check_lengths(y=y, w=w)
    sum_w = float(np.sum(w))
    if len(y) == 0 or sum_w <= 0:
        raise ValueError("node is empty")
    if np.any(y <= 0):
        raise ValueError("gamma responses must be strictly positive")
    return float(np.sum(y * w)) / sum_w


def negative_gradient(kind: LossKind, y, w, f) -> np.ndarray:
    """Pseudo-residuals: minus the half-deviance gradient in the log-link score ``f``.

    Poisson: ``y - w*exp(f)``; gamma: ``w*(y/exp(f) - 1)``.  The constant
    factor 2 of the deviance is dropped — it is absorbed by the line search
    that follows in boosting.
    """
    y, w, f = _as_vector("y", y), _as_vector("w", w), _as_vector("f", f)
    _check_lengths(y=y, w=w, f=f)
    if not np.all(np.isfinite(f)):
        raise ValueError("link scores must be finite")
    if kind is LossKind.POISSON:
        return y - w * np.exp(f)
    if kind is LossKind.GAMMA:
        return w * (y * np.exp(-f) - 1.0)
    raise ValueError(f"negative_gradient is defined for Poisson and gamma, not {kind!r}")
