"""Test-retest repeatability and calibration of classification predictors.

Thin Python layer over the C++ core: per-image severity scoring,
Bland-Altman limits of agreement, classification and calibration metrics,
bootstrap/Welch/Shapiro-Wilk statistics, and the end-to-end simulation.
"""

from ._core import (
    Error,
    accuracy,
    assign_class,
    bootstrap_mean,
    brier_score_binary,
    compare,
    evaluate,
    limits_of_agreement,
    normal_quantile,
    percentile,
    quadratic_weighted_kappa,
    severity_score,
    shapiro_wilk,
    simulate,
    sweep,
    welch_t_test,
)

__all__ = [
    "Error",
    "accuracy",
    "assign_class",
    "bootstrap_mean",
    "brier_score_binary",
    "compare",
    "evaluate",
    "limits_of_agreement",
    "normal_quantile",
    "percentile",
    "quadratic_weighted_kappa",
    "severity_score",
    "shapiro_wilk",
    "simulate",
    "sweep",
    "welch_t_test",
]

__version__ = "0.1.0"
