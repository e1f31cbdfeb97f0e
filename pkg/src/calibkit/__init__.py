"""Calibration toolkit for classifier prediction logs."""

from .calibrators import (
    HistogramBinning,
    Identity,
    Isotonic,
    Method,
    Objective,
    Temperature,
    apply_map,
    apply_temperature,
    calibrate,
    fit,
    fit_histogram_binning,
    fit_isotonic,
    fit_temperature,
    pava,
)
from .core import (
    CalibkitError,
    ClassWeights,
    InvalidInputError,
    PredictionSet,
    PredictionView,
    ScoreKind,
    average_ensemble,
    balanced_weights,
    softmax,
    to_logits,
    view,
)
from .harness import EvalConfig, EvaluationReport, bootstrap_evaluate, compare_methods, synthesize_predictions
from .metrics import (
    BinStat,
    EmptySelectionError,
    ReliabilityCurve,
    accuracy,
    bin_predictions,
    brier,
    ece,
    ece_odds,
    expected_calibration_error,
    nll,
)
from .stats import DispersionStats, dispersion

__version__ = "0.1.0"
