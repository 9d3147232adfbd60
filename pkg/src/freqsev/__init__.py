"""Frequency-severity insurance pricing with deviance-loss trees and tree ensembles.

The package fits claim-frequency (Poisson, exposure-weighted) and
claim-severity (gamma, claim-count-weighted) models with CART regression
trees, random forests and stochastic gradient boosting, tunes them with a
nested cross-validation scheme, and compares the resulting tariffs through
partial-dependence/interaction diagnostics and loss-ratio / Lorenz / Gini
lift economics.
"""

from .data import (
    FeatureSpec,
    FoldAssignment,
    PolicyRecord,
    Portfolio,
    RegressionProblem,
    SimConfig,
    SimFeature,
    SimTerm,
    SimTruth,
    Surface,
    encode_row,
    frequency_view,
    load_portfolio,
    schema_from_dict,
    schema_to_dict,
    severity_view,
    sim_config_from_dict,
    sim_config_to_dict,
    simulate_portfolio,
    stratified_folds,
)
from .loss import (
    LossKind,
    NodeShrinkage,
    deviance,
    gamma_deviance,
    gamma_node_estimate,
    negative_gradient,
    poisson_deviance,
    poisson_node_estimate,
    squared_error,
)
from .tree import (
    Leaf,
    Split,
    Tree,
    TreeParams,
    best_split,
    export_text,
    gated_predict,
    grow,
    order_categorical_levels,
    parse_text,
    predict,
    tree_from_dict,
    tree_to_dict,
)
from .forest import (
    Forest,
    ForestParams,
    fit_forest,
    forest_from_dict,
    forest_to_dict,
    predict_forest,
)
from .gbm import (
    Gbm,
    GbmParams,
    fit_gbm,
    gbm_from_dict,
    gbm_to_dict,
    predict_gbm,
    staged_deviance,
)
from .tune import (
    CvReport,
    TuningGrid,
    default_cp_grid,
    default_depth_grid,
    default_m_grid,
    default_shrink_grid,
    default_size_grid,
    nested_t_errors,
    run_cv,
)
from .interpret import (
    GroupedPd,
    HResult,
    IceBundle,
    ImportanceReport,
    PdCurve,
    default_grid,
    grouped_partial_dependence,
    h_statistic,
    ice,
    model_predictions,
    partial_dependence,
    variable_importance,
)
from .lift import (
    GiniMatrix,
    LiftTable,
    LorenzResult,
    TariffComparison,
    double_lift,
    equal_exposure_bins,
    gini_matrix,
    loss_ratio_lift,
    ordered_lorenz_gini,
    technical_premium,
    technical_premiums,
)

__version__ = "0.1.0"

__all__ = [
    "FeatureSpec",
    "FoldAssignment",
    "PolicyRecord",
    "Portfolio",
    "RegressionProblem",
    "SimConfig",
    "SimFeature",
    "SimTerm",
    "SimTruth",
    "Surface",
    "encode_row",
    "frequency_view",
    "load_portfolio",
    "schema_from_dict",
    "schema_to_dict",
    "severity_view",
    "sim_config_from_dict",
    "sim_config_to_dict",
    "simulate_portfolio",
    "stratified_folds",
    "LossKind",
    "NodeShrinkage",
    "deviance",
    "gamma_deviance",
    "gamma_node_estimate",
    "negative_gradient",
    "poisson_deviance",
    "poisson_node_estimate",
    "squared_error",
    "Leaf",
    "Split",
    "Tree",
    "TreeParams",
    "best_split",
    "export_text",
    "gated_predict",
    "grow",
    "order_categorical_levels",
    "parse_text",
    "predict",
    "tree_from_dict",
    "tree_to_dict",
    "Forest",
    "ForestParams",
    "fit_forest",
    "forest_from_dict",
    "forest_to_dict",
    "predict_forest",
    "Gbm",
    "GbmParams",
    "fit_gbm",
    "gbm_from_dict",
    "gbm_to_dict",
    "predict_gbm",
    "staged_deviance",
    "CvReport",
    "TuningGrid",
    "nested_t_errors",
    "run_cv",
    "GroupedPd",
    "HResult",
    "IceBundle",
    "ImportanceReport",
    "PdCurve",
    "default_cp_grid",
    "default_depth_grid",
    "default_grid",
    "default_m_grid",
    "default_shrink_grid",
    "default_size_grid",
    "grouped_partial_dependence",
    "h_statistic",
    "ice",
    "model_predictions",
    "partial_dependence",
    "variable_importance",
    "GiniMatrix",
    "LiftTable",
    "LorenzResult",
    "TariffComparison",
    "double_lift",
    "equal_exposure_bins",
    "gini_matrix",
    "loss_ratio_lift",
    "ordered_lorenz_gini",
    "technical_premium",
    "technical_premiums",
    "__version__",
]
