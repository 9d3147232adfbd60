"""Matplotlib renderings of report artifacts.

Every function draws one figure from an already-computed result object and
writes it to a file, returning the path.  Rendering happens on the Agg
backend so report runs work headless; the CSV written next to each figure
remains the authoritative output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .interpret import GroupedPd, HResult, IceBundle, ImportanceReport, PdCurve
from .lift import GiniMatrix, LiftTable, LorenzResult


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_importance(report: ImportanceReport, path: str | Path) -> Path:
    order = np.argsort(report.share)
    names = [report.names[i] for i in order]
    fig, ax = plt.subplots(figsize=(7, 0.4 * len(names) + 1.5))
    ax.barh(names, report.share[order], color="steelblue")
    ax.set_xlabel("importance (%)")
    ax.set_title("Variable importance")
    return _finish(fig, path)


def save_pd(curve: PdCurve, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    numeric = tuple(curve.labels) == tuple(repr(float(v)) for v in curve.grid)
    if numeric:
        ax.plot(curve.grid, curve.values, marker=".", color="steelblue")
    else:
        ax.bar(curve.labels, curve.values, color="steelblue")
        ax.tick_params(axis="x", rotation=45)
    ax.set_xlabel(curve.feature)
    ax.set_ylabel(f"partial dependence ({curve.scale})")
    ax.set_title(f"Partial dependence: {curve.feature}")
    return _finish(fig, path)


def save_ice(bundle: IceBundle, curve: PdCurve, path: str | Path, max_curves: int = 200) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    step = max(1, len(bundle.rows) // max_curves)
    for row in bundle.matrix[::step]:
        ax.plot(bundle.grid, row, color="gray", alpha=0.25, linewidth=0.7)
    ax.plot(curve.grid, curve.values, color="crimson", linewidth=2.0, label="average")
    ax.set_xlabel(bundle.feature)
    ax.set_ylabel(f"prediction ({bundle.scale})")
    ax.set_title(f"Individual conditional expectations: {bundle.feature}")
    ax.legend()
    return _finish(fig, path)


def save_grouped_pd(gpd: GroupedPd, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, curve in zip(gpd.group_labels, gpd.curves):
        ax.plot(curve.grid, curve.values, marker=".", label=f"{gpd.group_feature} {label}")
    ax.set_xlabel(gpd.feature)
    ax.set_ylabel("partial dependence (shifted to 0)")
    ax.set_title(f"Partial dependence of {gpd.feature} by {gpd.group_feature}")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def save_h_matrix(results: list[HResult], path: str | Path) -> Path:
    names = sorted({r.feature_k for r in results} | {r.feature_l for r in results})
    index = {name: i for i, name in enumerate(names)}
    grid = np.full((len(names), len(names)), np.nan)
    for r in results:
        grid[index[r.feature_k], index[r.feature_l]] = r.h
        grid[index[r.feature_l], index[r.feature_k]] = r.h
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * len(names), 1.0 + 0.6 * len(names)))
    im = ax.imshow(grid, cmap="viridis", vmin=0.0)
    ax.set_xticks(range(len(names)), names, rotation=90, fontsize=8)
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.set_title("Pairwise interaction strength")
    fig.colorbar(im, ax=ax, shrink=0.8)
    return _finish(fig, path)


def save_lift(table: LiftTable, path: str | Path, kind: str = "loss_ratio") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if kind == "loss_ratio":
        ax.bar(table.bin_label, table.loss_ratio, color="steelblue")
        ax.axhline(1.0, color="black", linewidth=0.8, linestyle="--")
        ax.set_ylabel("loss ratio (benchmark premium)")
        ax.set_title("Loss-ratio lift")
    else:
        ax.plot(table.bin_label, table.pe_bench, marker="o", label="benchmark")
        ax.plot(table.bin_label, table.pe_comp, marker="o", label="competitor")
        ax.axhline(0.0, color="black", linewidth=0.8, linestyle="--")
        ax.set_ylabel("premium / loss - 1")
        ax.set_title("Double lift")
        ax.legend()
    ax.set_xlabel("relativity bin (equal exposure)")
    ax.set_xticks(table.bin_label)
    return _finish(fig, path)


def save_lorenz(lorenz: LorenzResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.plot([0, 1], [0, 1], color="black", linewidth=0.8, linestyle="--")
    ax.plot(lorenz.premium_share, lorenz.loss_share, color="steelblue", marker=".")
    ax.set_xlabel("cumulative benchmark premium share")
    ax.set_ylabel("cumulative loss share")
    ax.set_title(f"Ordered Lorenz curve (Gini = {lorenz.gini:.2f})")
    return _finish(fig, path)


def save_gini_matrix(gm: GiniMatrix, path: str | Path) -> Path:
    k = len(gm.names)
    fig, ax = plt.subplots(figsize=(1.5 + 0.8 * k, 1.5 + 0.8 * k))
    im = ax.imshow(gm.matrix, cmap="RdYlGn_r")
    for b in range(k):
        for c in range(k):
            if b != c:
                ax.text(c, b, f"{gm.matrix[b, c]:.2f}", ha="center", va="center", fontsize=8)
    ax.set_xticks(range(k), gm.names, rotation=45, fontsize=8)
    ax.set_yticks(range(k), gm.names, fontsize=8)
    ax.set_xlabel("competitor")
    ax.set_ylabel("benchmark")
    ax.set_title(f"Gini matrix (mini-max: {gm.minimax})")
    fig.colorbar(im, ax=ax, shrink=0.8)
    return _finish(fig, path)
