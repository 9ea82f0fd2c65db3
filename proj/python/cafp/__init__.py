"""Counterfactual averaging for fair predictions.

Scores a trained classifier at both values of a binary protected attribute and
averages them. The compiled core also provides the baselines, fairness
metrics and the repeated-split harness used by the ``cafp`` command.
"""

from ._core import (
    CafpError,
    CertificateError,
    ConfigError,
    DataError,
    DivergenceError,
    EmptyDatasetError,
    FitError,
    Model,
    ParseError,
    SchemaError,
    ShapeError,
    apply_eqodds,
    apply_reject_option,
    audit,
    cafp_batch,
    cafp_scores,
    compute_metrics,
    decision_metrics,
    eo_bound_certificate,
    fit_eqodds,
    fit_forest,
    fit_gbt,
    fit_logistic,
    load_dataset,
    load_model,
    mutual_info,
    score_eod,
    select_theta,
    synthetic_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
