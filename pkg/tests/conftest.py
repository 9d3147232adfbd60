"""Shared fixtures: one mid-sized simulated portfolio and its learning views.

The portfolio mixes a smooth nonlinearity, a two-way interaction and a
categorical offset so trees, forests and boosting all have structure to find,
while staying small enough for fast unit runs.  Session scope keeps the
simulation cost paid once.
"""

import numpy as np
import pytest

from freqsev import (
    SimConfig,
    SimFeature,
    SimTerm,
    Surface,
    frequency_view,
    severity_view,
    simulate_portfolio,
    stratified_folds,
)


def small_sim_config(n: int = 2500) -> SimConfig:
    """Portfolio recipe: sine + linear + product terms, one categorical."""
    return SimConfig(
        n=n,
        features=(
            SimFeature("age", low=0.0, high=3.0),
            SimFeature("power", low=-1.0, high=1.0),
            SimFeature("density", low=-1.0, high=1.0),
            SimFeature("fuel", levels=("diesel", "gasoline"), probs=(0.4, 0.6)),
        ),
        freq_surface=Surface(
            intercept=-1.9,
            terms=(
                SimTerm("sine", "age", coef=0.4),
                SimTerm("linear", "power", coef=0.5),
                SimTerm("product", "power", coef=0.6, feature2="density"),
                SimTerm("level", "fuel", coef=0.3, level="diesel"),
            ),
        ),
        sev_surface=Surface(
            intercept=7.0,
            terms=(
                SimTerm("linear", "power", coef=0.4),
                SimTerm("level", "fuel", coef=-0.2, level="diesel"),
            ),
        ),
        sev_shape=2.0,
        expo_low=0.5,
        expo_high=1.0,
    )


@pytest.fixture(scope="session")
def portfolio():
    pf, _ = simulate_portfolio(small_sim_config(), seed=42)
    return pf


@pytest.fixture(scope="session")
def freq_problem(portfolio):
    return frequency_view(portfolio)


@pytest.fixture(scope="session")
def sev_problem(portfolio):
    return severity_view(portfolio)


@pytest.fixture(scope="session")
def folds(portfolio):
    return stratified_folds(portfolio, k=6, seed=7)
