"""Reliability curves, ECE, ECE over better-than-odds predictions, and scoring rules.

Every metric takes optional per-example weights. ``None`` means uniform; the
balanced class weighting is realized by passing
``balanced_weights(labels, C).per_example(labels)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import CalibkitError, PredictionSet, PredictionView, example_weights, resolve_weights, view

DEFAULT_BINS = 15
ODDS_THRESHOLD = 0.5
NLL_FLOOR = 1e-12


class EmptySelectionError(CalibkitError):
    """No example reached the confidence threshold."""


@dataclass(frozen=True)
class BinStat:
    lower: float
    upper: float
    weight_mass: float
    count: int
    mean_confidence: float
    mean_accuracy: float

    @property
    def empty(self) -> bool:
        return self.weight_mass <= 0.0


@dataclass(frozen=True)
class ReliabilityCurve:
    bin_count: int
    threshold: float
    bins: List[BinStat]
    total_weight: float
    included_count: int


def bin_edges(m: int) -> np.ndarray:
    return np.arange(m + 1) / m


def bin_index(values, m: int) -> np.ndarray:
    """Bin ``k`` covers ``[k/m, (k+1)/m)``; the last bin is closed at 1."""
    idx = np.searchsorted(bin_edges(m), np.asarray(values, dtype=float), side="right") - 1
    return np.clip(idx, 0, m - 1)


def _weighted_mean(values: np.ndarray, w: np.ndarray, total: float) -> float:
    # shifted by the first member: identical values give that value back exactly
    ref = values[0]
    return float(ref + np.sum(w * (values - ref)) / total)


def bin_predictions(pv: PredictionView, weights=None, m: int = DEFAULT_BINS,
                    threshold: float = 0.0) -> ReliabilityCurve:
    """Group predictions into ``m`` equal-width confidence bins.

    Only examples with ``confidence >= threshold`` take part. Raises
    :class:`EmptySelectionError` when the included weight is zero.
    """
    if m < 1:
        raise ValueError("need at least one bin")
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    conf = np.asarray(pv.confidence, dtype=float)
    correct = np.asarray(pv.correct, dtype=float)
    w = resolve_weights(weights, conf.shape[0])

    keep = conf >= threshold
    conf, correct, w = conf[keep], correct[keep], w[keep]
    total = float(w.sum())
    if conf.size == 0 or total <= 0.0:
        raise EmptySelectionError(f"no prediction with confidence >= {threshold}")

    edges = bin_edges(m)
    idx = bin_index(conf, m)
    order = np.argsort(idx, kind="stable")
    starts = np.searchsorted(idx[order], np.arange(m + 1))
    bins = []
    for k in range(m):
        members = order[starts[k]:starts[k + 1]]
        bw = w[members]
        mass = float(bw.sum())
        if mass > 0.0:
            mc = _weighted_mean(conf[members], bw, mass)
            ma = float(np.sum(bw * correct[members]) / mass)
        else:
            mc = ma = 0.0
        bins.append(BinStat(float(edges[k]), float(edges[k + 1]), mass, int(members.size), mc, ma))
    return ReliabilityCurve(m, float(threshold), bins, total, int(conf.size))


def ece(curve: ReliabilityCurve) -> float:
    """Mass-weighted mean gap between bin accuracy and bin confidence."""
    total = 0.0
    for b in curve.bins:
        if b.weight_mass > 0.0:
            total += (b.weight_mass / curve.total_weight) * abs(b.mean_accuracy - b.mean_confidence)
    return total


def ece_odds(ps: PredictionSet, weights=None, m: int = DEFAULT_BINS,
             threshold: float = ODDS_THRESHOLD) -> float:
    """ECE restricted to better-than-odds predictions (confidence >= 0.5).

    The bin grid is unchanged; normalization uses the included weight only.
    """
    return ece(bin_predictions(view(ps), example_weights(weights, ps), m, threshold))


def expected_calibration_error(ps: PredictionSet, weights=None, m: int = DEFAULT_BINS) -> float:
    return ece(bin_predictions(view(ps), example_weights(weights, ps), m, 0.0))


def accuracy(pv: PredictionView, weights=None) -> float:
    correct = np.asarray(pv.correct, dtype=float)
    w = resolve_weights(weights, correct.shape[0])
    return float(np.sum(w * correct) / w.sum())


def nll(ps: PredictionSet, weights=None, floor: float = NLL_FLOOR) -> float:
    w = example_weights(weights, ps)
    p = ps.probabilities()[np.arange(ps.n), ps.labels]
    return float(np.sum(w * -np.log(np.clip(p, floor, 1.0))) / w.sum())


def brier(ps: PredictionSet, weights=None) -> float:
    w = example_weights(weights, ps)
    probs = ps.probabilities()
    onehot = np.zeros_like(probs)
    onehot[np.arange(ps.n), ps.labels] = 1.0
    per_row = np.sum((probs - onehot) ** 2, axis=1)
    return float(np.sum(w * per_row) / w.sum())


def all_metrics(ps: PredictionSet, weights=None, m: int = DEFAULT_BINS,
                threshold: float = ODDS_THRESHOLD) -> dict:
    """Accuracy, ECE, ECE>=threshold, NLL and Brier in one pass.

    ``ece_odds`` is ``None`` when no prediction reaches the threshold.
    """
    w = example_weights(weights, ps)
    pv = view(ps)
    full = bin_predictions(pv, w, m, 0.0)
    odds: Optional[float]
    try:
        odds = ece(bin_predictions(pv, w, m, threshold))
    except EmptySelectionError:
        odds = None
    return {
        "accuracy": accuracy(pv, w),
        "ece": ece(full),
        "ece_odds": odds,
        "nll": nll(ps, w),
        "brier": brier(ps, w),
        "curve": full,
    }
