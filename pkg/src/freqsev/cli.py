"""Batch command-line front end for the pricing pipeline.

Subcommands cover the full workflow: ``simulate`` portfolios, assign
``folds``, ``tune`` hyper-parameters by cross-validation, ``fit`` a model,
``predict`` per policy, ``interpret`` a fitted model and compare tariffs
with ``lift``.  Each run is driven by a JSON config file (``--config``)
with optional ``--seed``/``--out``/``--threads`` overrides, writes its
tabular outputs as CSV (figures rendered as PNG next to them), and records
a ``manifest.json`` (command, resolved config, config hash, library
versions, output list) plus wall-clock timestamps in ``run_info.json`` —
the manifest is byte-stable across reruns, the timestamps are not, so they
live apart.

Exit codes: 0 success, 1 usage/config error, 2 data or validation error,
3 internal failure.  Failures print a machine-readable JSON object on
standard error.
"""

from __future__ import annotations

import hashlib
import importlib.metadata
import json
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .data import (
    FoldAssignment,
    Portfolio,
    frequency_view,
    load_portfolio,
    schema_from_dict,
    schema_to_dict,
    severity_view,
    sim_config_from_dict,
    simulate_portfolio,
    stratified_folds,
)
from .figures import (
    save_gini_matrix,
    save_grouped_pd,
    save_h_matrix,
    save_ice,
    save_importance,
    save_lift,
    save_lorenz,
    save_pd,
)
from .forest import Forest, ForestParams, fit_forest, forest_from_dict, forest_to_dict
from .gbm import Gbm, GbmParams, fit_gbm, gbm_from_dict, gbm_to_dict
from .interpret import (
    grouped_partial_dependence,
    h_statistic,
    ice,
    partial_dependence,
    variable_importance,
)
from .lift import (
    TariffComparison,
    double_lift,
    gini_matrix,
    loss_ratio_lift,
    ordered_lorenz_gini,
)
from .loss import LossKind, NodeShrinkage
from .tree import Tree, TreeParams, grow, tree_from_dict, tree_to_dict
from .tune import TuningGrid, run_cv


class ConfigError(Exception):
    """Malformed or incomplete run configuration."""


# ---------------------------------------------------------------------------
# Config plumbing


def _load_config(path: str | None) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _resolve(cfg: dict, seed: int | None, out: str | None) -> tuple[dict, int, Path]:
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    if "seed" not in cfg:
        raise ConfigError("a seed is required (config key 'seed' or --seed)")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if "out" not in cfg:
        raise ConfigError("an output directory is required (config key 'out' or --out)")
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    return cfg, cfg["seed"], out_dir


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config key {key!r} is required")
    return cfg[key]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return "" if np.isnan(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> Path:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def _write_json(path: Path, payload) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_run_files(out_dir: Path, command: str, cfg: dict, outputs: list[Path], started: float) -> None:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    manifest = {
        "command": command,
        "config": cfg,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": cfg["seed"],
        "versions": {
            "artifact": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "click": importlib.metadata.version("click"),
        },
        "outputs": sorted(p.name for p in outputs),
    }
    _write_json(out_dir / "manifest.json", manifest)
    finished = time.time()
    _write_json(
        out_dir / "run_info.json",
        {
            "command": command,
            "started_utc": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
            "finished_utc": datetime.fromtimestamp(finished, tz=timezone.utc).isoformat(),
            "duration_seconds": finished - started,
        },
    )


# ---------------------------------------------------------------------------
# Portfolio / folds / model I/O


def write_portfolio(portfolio: Portfolio, path: str | Path) -> Path:
    """Write a portfolio as CSV: identity columns then feature columns."""
    names = [s.name for s in portfolio.schema]
    header = ["id", "expo", "nclaims", "amount"] + names
    rows = (
        [r.id, r.expo, r.nclaims, r.amount] + [r.features[n] for n in names]
        for r in portfolio.records
    )
    return _write_csv(Path(path), header, rows)


def write_folds(portfolio: Portfolio, folds: FoldAssignment, path: str | Path) -> Path:
    rows = zip(portfolio.ids(), folds.labels)
    return _write_csv(Path(path), ["id", "fold"], rows)


def read_folds(portfolio: Portfolio, path: str | Path) -> FoldAssignment:
    """Load a fold file and align it to the portfolio's row order by id."""
    import csv

    by_id = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"id", "fold"}:
            raise ValueError(f"{path}: expected columns id,fold")
        for row in reader:
            by_id[row["id"]] = int(row["fold"])
    labels = np.empty(len(portfolio.records), dtype=np.intp)
    for i, pid in enumerate(portfolio.ids()):
        if pid not in by_id:
            raise ValueError(f"{path}: no fold for policy {pid!r}")
        labels[i] = by_id[pid]
    return FoldAssignment(k=int(labels.max()), labels=labels)


def save_model(model: Tree | Forest | Gbm, path: str | Path) -> Path:
    if isinstance(model, Tree):
        payload = tree_to_dict(model)
    elif isinstance(model, Forest):
        payload = forest_to_dict(model)
    elif isinstance(model, Gbm):
        payload = gbm_to_dict(model)
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    return _write_json(Path(path), payload)


def load_model(path: str | Path) -> Tree | Forest | Gbm:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("model")
    if kind == "tree":
        return tree_from_dict(payload)
    if kind == "forest":
        return forest_from_dict(payload)
    if kind == "gbm":
        return gbm_from_dict(payload)
    raise ValueError(f"{path}: unknown model kind {kind!r}")


def _load_inputs(cfg: dict) -> Portfolio:
    schema_path = _need(cfg, "schema")
    with open(schema_path, encoding="utf-8") as fh:
        schema = schema_from_dict(json.load(fh))
    return load_portfolio(_need(cfg, "portfolio"), schema)


def _view(portfolio: Portfolio, response: str):
    if response == "frequency":
        return frequency_view(portfolio)
    if response == "severity":
        return severity_view(portfolio)
    raise ConfigError(f"response must be 'frequency' or 'severity', got {response!r}")


# ---------------------------------------------------------------------------
# Commands


@click.group()
def cli() -> None:
    """Frequency-severity pricing pipeline."""


def _common(fn):
    fn = click.option("--config", "config_path", type=str, default=None, help="JSON run config")(fn)
    fn = click.option("--seed", type=int, default=None, help="override the config seed")(fn)
    fn = click.option("--out", type=str, default=None, help="override the output directory")(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True, help="worker thread cap")(fn)
    return fn


@cli.command()
@_common
def simulate(config_path, seed, out, threads) -> None:
    """Draw a synthetic portfolio from configured rate/severity surfaces."""
    started = time.time()
    cfg, seed, out_dir = _resolve(_load_config(config_path), seed, out)
    sim_cfg = sim_config_from_dict(_need(cfg, "sim"))
    portfolio, _truth = simulate_portfolio(sim_cfg, seed)
    outputs = [
        write_portfolio(portfolio, out_dir / "portfolio.csv"),
        _write_json(out_dir / "schema.json", schema_to_dict(portfolio.schema)),
    ]
    _write_run_files(out_dir, "simulate", cfg, outputs, started)


@cli.command()
@_common
def folds(config_path, seed, out, threads) -> None:
    """Assign stratified cross-validation folds to a portfolio."""
    started = time.time()
    cfg, seed, out_dir = _resolve(_load_config(config_path), seed, out)
    portfolio = _load_inputs(cfg)
    k = int(cfg.get("k", 6))
    assignment = stratified_folds(portfolio, k, seed)
    outputs = [write_folds(portfolio, assignment, out_dir / "folds.csv")]
    _write_run_files(out_dir, "folds", cfg, outputs, started)


def _grid_from_config(family: str, grid_cfg: dict, p: int) -> TuningGrid:
    g = dict(grid_cfg)
    if family == "tree":
        shrink = g.get("shrink_values")
        return TuningGrid.tree(
            cp_values=g.get("cp_values"),
            shrink_values=None if shrink is None else tuple(shrink),
            kappa=g.get("kappa", 0.01),
        )
    if family == "forest":
        return TuningGrid.forest(
            t_values=g.get("t_values"),
            m_values=g.get("m_values"),
            p=p,
            delta=g.get("delta", 0.75),
            gamma=g.get("gamma", 0.25),
            kappa=g.get("kappa", 0.01),
        )
    if family == "gbm":
        return TuningGrid.gbm(
            t_values=g.get("t_values"),
            d_values=g.get("d_values"),
            lam=g.get("lam", 0.1),
            delta=g.get("delta", 0.75),
            kappa=g.get("kappa", 0.01),
        )
    raise ConfigError(f"unknown model family {family!r}")


@cli.command()
@_common
def tune(config_path, seed, out, threads) -> None:
    """Cross-validate a hyper-parameter grid and report per-fold winners."""
    started = time.time()
    cfg, seed, out_dir = _resolve(_load_config(config_path), seed, out)
    portfolio = _load_inputs(cfg)
    problem = _view(portfolio, _need(cfg, "response"))
    assignment = read_folds(portfolio, _need(cfg, "folds"))
    if _need(cfg, "response") == "severity":
        assignment = _restrict_folds(portfolio, assignment, problem.ids)
    family = _need(cfg, "family")
    grid = _grid_from_config(family, _need(cfg, "grid"), problem.p)
    report = run_cv(problem, assignment, grid, seed, n_threads=threads)
    axis_names = [grid.first_name, grid.second_name]
    rows = []
    for ki, fold in enumerate(report.fold_labels):
        for pi, point in enumerate(report.points):
            rows.append(
                [fold, pi]
                + [point[a] for a in axis_names]
                + [report.scores[ki, pi], int(pi == report.winners[ki])]
            )
    outputs = [
        _write_csv(
            out_dir / "cv_scores.csv",
            ["fold", "point", *axis_names, "mean_deviance", "winner"],
            rows,
        ),
        _write_json(out_dir / "cv_report.json", report.to_dict()),
    ]
    _write_run_files(out_dir, "tune", cfg, outputs, started)


def _restrict_folds(portfolio: Portfolio, assignment: FoldAssignment, kept_ids) -> FoldAssignment:
    """Carry fold labels over to the severity subset of the portfolio."""
    label_of = dict(zip(portfolio.ids(), assignment.labels))
    labels = np.asarray([label_of[pid] for pid in kept_ids], dtype=np.intp)
    return FoldAssignment(k=assignment.k, labels=labels)


def _params_from_config(family: str, params_cfg: dict, loss: LossKind):
    p = dict(params_cfg)
    if family == "tree":
        shrink = p.get("shrink")
        shrinkage = NodeShrinkage.disabled() if shrink is None else NodeShrinkage(gamma=shrink)
        return TreeParams(
            loss=loss,
            cp=p.get("cp", 0.0),
            kappa=p.get("kappa", 0.01),
            max_depth=p.get("max_depth"),
            shrinkage=shrinkage,
        )
    if family == "forest":
        return ForestParams(
            n_trees=int(_need(p, "n_trees")),
            m=int(_need(p, "m")),
            delta=p.get("delta", 0.75),
            gamma=p.get("gamma", 0.25),
            kappa=p.get("kappa", 0.01),
            cp=p.get("cp", 0.0),
            max_depth=p.get("max_depth"),
            loss=loss,
        )
    if family == "gbm":
        return GbmParams(
            n_stages=int(_need(p, "n_stages")),
            depth=int(_need(p, "depth")),
            lam=p.get("lam", 0.1),
            delta=p.get("delta", 0.75),
            kappa=p.get("kappa", 0.01),
            loss=loss,
        )
    raise ConfigError(f"unknown model family {family!r}")


@cli.command()
@_common
def fit(config_path, seed, out, threads) -> None:
    """Fit one model with fixed parameters and persist it as JSON."""
    started = time.time()
    cfg, seed, out_dir = _resolve(_load_config(config_path), seed, out)
    portfolio = _load_inputs(cfg)
    problem = _view(portfolio, _need(cfg, "response"))
    family = _need(cfg, "family")
    params = _params_from_config(family, _need(cfg, "params"), problem.loss)
    if family == "tree":
        model = grow(problem, params)
    elif family == "forest":
        model = fit_forest(problem, params, seed, n_threads=threads)
    else:
        model = fit_gbm(problem, params, seed)
    outputs = [save_model(model, out_dir / "model.json")]
    _write_run_files(out_dir, "fit", cfg, outputs, started)


@cli.command()
@_common
def predict(config_path, seed, out, threads) -> None:
    """Score every policy of a portfolio with a persisted model."""
    started = time.time()
    cfg, seed, out_dir = _resolve(_load_config(config_path), seed, out)
    portfolio = _load_inputs(cfg)
    model = load_model(_need(cfg, "model"))
    X = portfolio.feature_matrix()
    preds = model.predict_matrix(X)
    outputs = [
        _write_csv(
            out_dir / "predictions.csv",
            ["id", "prediction"],
            zip(portfolio.ids(), preds),
        )
    ]
    _write_run_files(out_dir, "predict", cfg, outputs, started)


@cli.command()
@_common
def interpret(config_path, seed, out, threads) -> None:
    """Write importance, partial-dependence, ICE and interaction reports."""
    started = time.time()
    cfg, seed, out_dir = _resolve(_load_config(config_path), seed, out)
    portfolio = _load_inputs(cfg)
    model = load_model(_need(cfg, "model"))
    X = portfolio.feature_matrix()
    ids = portfolio.ids()
    scale = cfg.get("scale", "response")
    rng = np.random.default_rng(seed)
    outputs: list[Path] = []

    if cfg.get("importance", True):
        report = variable_importance(model)
        outputs.append(
            _write_csv(
                out_dir / "importance.csv",
                ["feature", "share_percent", "raw"],
                zip(report.names, report.share, report.raw),
            )
        )
        outputs.append(save_importance(report, out_dir / "importance.png"))

    names = [s.name for s in model.features]
    pd_features = cfg.get("pd_features", [])
    if pd_features == "all":
        pd_features = names
    for name in pd_features:
        curve = partial_dependence(model, X, name, scale=scale)
        outputs.append(
            _write_csv(
                out_dir / f"pd_{name}.csv",
                ["feature", "grid", "value", "extrapolated"],
                zip(
                    [name] * len(curve.grid),
                    curve.labels,
                    curve.values,
                    curve.extrapolated.astype(int),
                ),
            )
        )
        outputs.append(save_pd(curve, out_dir / f"pd_{name}.png"))

    ice_feature = cfg.get("ice_feature")
    if ice_feature is not None:
        n_rows = int(cfg.get("ice_rows", 200))
        rows = np.sort(rng.choice(X.shape[0], size=min(n_rows, X.shape[0]), replace=False))
        bundle = ice(model, X, ice_feature, rows=rows, scale=scale)
        curve = partial_dependence(model, X, ice_feature, rows=rows, scale=scale)
        tidy = []
        for i, row in enumerate(bundle.rows):
            for g in range(len(bundle.grid)):
                tidy.append([ids[row], bundle.labels[g], bundle.matrix[i, g]])
        outputs.append(
            _write_csv(out_dir / f"ice_{ice_feature}.csv", ["id", "grid", "value"], tidy)
        )
        outputs.append(save_ice(bundle, curve, out_dir / f"ice_{ice_feature}.png"))

    grouped_cfg = cfg.get("grouped")
    if grouped_cfg is not None:
        gpd = grouped_partial_dependence(
            model,
            X,
            _need(grouped_cfg, "feature"),
            _need(grouped_cfg, "by"),
            q=int(grouped_cfg.get("q", 5)),
            scale=scale,
        )
        tidy = []
        for label, curve in zip(gpd.group_labels, gpd.curves):
            for g in range(len(curve.grid)):
                tidy.append([gpd.feature, label, curve.labels[g], curve.values[g]])
        outputs.append(
            _write_csv(
                out_dir / f"grouped_pd_{gpd.feature}.csv",
                ["feature", "group", "grid", "value"],
                tidy,
            )
        )
        outputs.append(save_grouped_pd(gpd, out_dir / f"grouped_pd_{gpd.feature}.png"))

    h_pairs = cfg.get("h_pairs", [])
    if h_pairs == "all":
        h_pairs = [[a, b] for i, a in enumerate(names) for b in names[i + 1 :]]
    if h_pairs:
        n_rows = int(cfg.get("h_rows", 500))
        rows = np.sort(rng.choice(X.shape[0], size=min(n_rows, X.shape[0]), replace=False))
        results = [
            h_statistic(model, X, a, b, rows=rows, scale=scale) for a, b in h_pairs
        ]
        outputs.append(
            _write_csv(
                out_dir / "h_statistic.csv",
                ["feature_k", "feature_l", "h", "degenerate"],
                [[r.feature_k, r.feature_l, r.h, int(r.degenerate)] for r in results],
            )
        )
        outputs.append(save_h_matrix(results, out_dir / "h_statistic.png"))

    _write_run_files(out_dir, "interpret", cfg, outputs, started)


def _read_premiums(path: str, ids: tuple[str, ...]) -> np.ndarray:
    import csv

    by_id = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise ValueError(f"{path}: expected an id column")
        value_col = [c for c in reader.fieldnames if c != "id"]
        if len(value_col) != 1:
            raise ValueError(f"{path}: expected exactly one value column next to id")
        for row in reader:
            by_id[row["id"]] = float(row[value_col[0]])
    missing = [pid for pid in ids if pid not in by_id]
    if missing:
        raise ValueError(f"{path}: no premium for policy {missing[0]!r}")
    return np.asarray([by_id[pid] for pid in ids])


@cli.command()
@_common
def lift(config_path, seed, out, threads) -> None:
    """Compare tariffs: lift tables, ordered Lorenz curve, Gini matrix."""
    started = time.time()
    cfg, seed, out_dir = _resolve(_load_config(config_path), seed, out)
    portfolio = _load_inputs(cfg)
    ids = portfolio.ids()
    losses = portfolio.amounts()
    exposures = portfolio.exposures()
    premium_cfg = _need(cfg, "premiums")
    if not isinstance(premium_cfg, dict) or len(premium_cfg) < 2:
        raise ConfigError("config key 'premiums' must map >= 2 tariff names to CSV paths")
    tariffs = {name: _read_premiums(path, ids) for name, path in premium_cfg.items()}
    bench = cfg.get("benchmark")
    if bench is None:
        bench = next(iter(tariffs))
    if bench not in tariffs:
        raise ConfigError(f"benchmark {bench!r} is not among the premium tariffs")
    comp = cfg.get("competitor")
    if comp is None:
        others = [name for name in tariffs if name != bench]
        comp = others[0]
    if comp not in tariffs:
        raise ConfigError(f"competitor {comp!r} is not among the premium tariffs")
    n_bins = int(cfg.get("n_bins", 5))
    method = cfg.get("method", "trapezoid")

    cmp = TariffComparison(
        ids=ids,
        p_bench=tariffs[bench],
        p_comp=tariffs[comp],
        loss=losses,
        exposure=exposures,
    )
    lift_header = [
        "bin", "n_policies", "exposure", "r_low", "r_high", "r_mean",
        "loss", "p_bench", "p_comp", "loss_ratio", "pe_bench", "pe_comp", "avg_loss",
    ]

    def lift_rows(table):
        for i in range(table.n_bins):
            yield [
                table.bin_label[i], table.n_policies[i], table.exposure[i],
                table.r_low[i], table.r_high[i], table.r_mean[i],
                table.loss[i], table.p_bench[i], table.p_comp[i],
                table.loss_ratio[i], table.pe_bench[i], table.pe_comp[i],
                table.avg_loss[i],
            ]

    lr = loss_ratio_lift(cmp, n_bins)
    dl = double_lift(cmp, n_bins)
    lorenz = ordered_lorenz_gini(cmp, method=method)
    gm = gini_matrix(tariffs, losses, exposures, ids=ids)

    outputs = [
        _write_csv(out_dir / "loss_ratio_lift.csv", lift_header, lift_rows(lr)),
        save_lift(lr, out_dir / "loss_ratio_lift.png", kind="loss_ratio"),
        _write_csv(out_dir / "double_lift.csv", lift_header, lift_rows(dl)),
        save_lift(dl, out_dir / "double_lift.png", kind="double"),
        _write_csv(
            out_dir / "lorenz.csv",
            ["premium_share", "loss_share"],
            zip(lorenz.premium_share, lorenz.loss_share),
        ),
        _write_json(
            out_dir / "lorenz.json",
            {
                "benchmark": bench,
                "competitor": comp,
                "gini": lorenz.gini,
                "profit": lorenz.profit,
                "method": lorenz.method,
            },
        ),
        save_lorenz(lorenz, out_dir / "lorenz.png"),
        _write_csv(
            out_dir / "gini_matrix.csv",
            ["benchmark", *gm.names],
            (
                [gm.names[b]] + [gm.matrix[b, c] for c in range(len(gm.names))]
                for b in range(len(gm.names))
            ),
        ),
        _write_json(
            out_dir / "gini_matrix.json",
            {
                "names": list(gm.names),
                "matrix": [
                    [None if np.isnan(v) else float(v) for v in row] for row in gm.matrix
                ],
                "minimax": gm.minimax,
            },
        ),
        save_gini_matrix(gm, out_dir / "gini_matrix.png"),
    ]
    _write_run_files(out_dir, "lift", cfg, outputs, started)


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": {"code": code, "type": kind, "message": message}}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    """Entry point mapping exceptions to documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        return _fail(1, "usage", exc.format_message())
    except click.exceptions.Abort:
        return _fail(3, "aborted", "aborted")
    except ConfigError as exc:
        return _fail(1, "config", str(exc))
    except (ValueError, KeyError, OSError) as exc:
        return _fail(2, "data", str(exc))
    except Exception as exc:  # pragma: no cover - defensive
        return _fail(3, "internal", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
