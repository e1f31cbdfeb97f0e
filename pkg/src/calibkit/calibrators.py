"""Post-hoc calibrators: temperature scaling, histogram binning, isotonic regression.

Histogram binning and isotonic regression are fitted one-vs-all, one map per
class column. Their outputs are not renormalized unless asked, so rows need not
sum to one and the arg-max may move.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .core import (
    InvalidInputError,
    PredictionSet,
    ScoreKind,
    example_weights,
    softmax,
)
from .metrics import DEFAULT_BINS, bin_index, brier, nll

T_MIN = 1e-3
T_MAX = 1e3
T_RTOL = 1e-6
CALIBRATOR_FORMAT = "calibkit.calibrator"
CALIBRATOR_VERSION = 1

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class Method(str, enum.Enum):
    IDENTITY = "identity"
    TEMPERATURE = "temperature"
    HISTOGRAM = "histogram"
    ISOTONIC = "isotonic"


class Objective(str, enum.Enum):
    NLL = "nll"
    BRIER = "brier"


@dataclass(frozen=True)
class Identity:
    metadata: dict = field(default_factory=dict)

    method = Method.IDENTITY


@dataclass(frozen=True)
class Temperature:
    t: float
    metadata: dict = field(default_factory=dict)

    method = Method.TEMPERATURE


@dataclass(frozen=True)
class HistogramBinning:
    # tables[c][k]: calibrated value of class c in bin k; empty bins hold fallback[c]
    tables: np.ndarray
    fallback: np.ndarray
    metadata: dict = field(default_factory=dict)

    method = Method.HISTOGRAM

    @property
    def bin_count(self) -> int:
        return self.tables.shape[1]


@dataclass(frozen=True)
class Isotonic:
    # one (scores, values) pair of arrays per class
    breakpoints: List[Tuple[np.ndarray, np.ndarray]]
    metadata: dict = field(default_factory=dict)

    method = Method.ISOTONIC


FittedCalibrator = Identity | Temperature | HistogramBinning | Isotonic


# -- temperature scaling ------------------------------------------------------

def _temperature_objective(logits, labels, w, objective: Objective):
    def f(log_t: float) -> float:
        ps = PredictionSet(softmax(logits / math.exp(log_t)), labels, ScoreKind.PROBABILITIES)
        return nll(ps, w) if objective is Objective.NLL else brier(ps, w)
    return f


def golden_section(f, lo: float, hi: float, tol: float):
    """Minimize a unimodal ``f`` on ``[lo, hi]`` until the bracket is narrower than ``tol``.

    Ties move the bracket towards ``lo``.
    """
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def fit_temperature(val: PredictionSet, objective=Objective.NLL, weights=None) -> Temperature:
    """Learn the scalar temperature minimizing NLL or Brier on ``val``.

    Golden-section search on ``log t`` over ``[T_MIN, T_MAX]``. A solution on a
    bracket bound is snapped to it and flagged in the metadata.
    """
    objective = Objective(objective)
    if val.n < 2:
        raise InvalidInputError("temperature fitting needs at least two examples")
    w = example_weights(weights, val)
    f = _temperature_objective(val.logits(), val.labels, w, objective)
    lo, hi = math.log(T_MIN), math.log(T_MAX)
    # bracket width on log t ~ relative width on t
    log_t, value = golden_section(f, lo, hi, T_RTOL)

    warning = None
    if log_t - lo <= 10 * T_RTOL:
        log_t, warning = lo, "temperature hit the lower bracket bound"
    elif hi - log_t <= 10 * T_RTOL:
        log_t, warning = hi, "temperature hit the upper bracket bound"
    value = f(log_t)
    at_one = f(0.0)
    if at_one < value:
        log_t, value, warning = 0.0, at_one, None

    meta = {
        "objective": objective.value,
        "fit_size": int(val.n),
        "objective_value": float(value),
        "objective_at_t1": float(at_one),
    }
    if warning:
        meta["warning"] = warning
    return Temperature(math.exp(log_t), meta)


def apply_temperature(cal: Temperature, ps: PredictionSet) -> PredictionSet:
    return PredictionSet(softmax(ps.logits() / cal.t), ps.labels, ScoreKind.PROBABILITIES)


# -- histogram binning --------------------------------------------------------

def fit_histogram_binning(val: PredictionSet, m: int = DEFAULT_BINS, weights=None) -> HistogramBinning:
    if m < 1:
        raise InvalidInputError("need at least one bin")
    w = example_weights(weights, val)
    probs = val.probabilities()
    C = val.class_count
    tables = np.zeros((C, m))
    fallback = np.zeros(C)
    for c in range(C):
        target = (val.labels == c).astype(float)
        fallback[c] = np.sum(w * target) / w.sum()
        idx = bin_index(probs[:, c], m)
        mass = np.bincount(idx, weights=w, minlength=m)
        hits = np.bincount(idx, weights=w * target, minlength=m)
        filled = mass > 0
        tables[c] = fallback[c]
        tables[c, filled] = hits[filled] / mass[filled]
    tables = np.clip(tables, 0.0, 1.0)
    meta = {"fit_size": int(val.n), "bins": int(m)}
    return HistogramBinning(tables, fallback, meta)


# -- isotonic regression ------------------------------------------------------

def pava(y, w=None) -> np.ndarray:
    """Weighted pool-adjacent-violators: monotone nondecreasing least squares fit.

    Points with zero weight must be removed by the caller.
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    values: List[float] = []
    weights: List[float] = []
    sizes: List[int] = []
    for yi, wi in zip(y, w):
        values.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(values) > 1 and values[-2] > values[-1]:
            v, wt, s = values.pop(), weights.pop(), sizes.pop()
            total = weights[-1] + wt
            values[-1] = (values[-1] * weights[-1] + v * wt) / total
            weights[-1] = total
            sizes[-1] += s
    return np.repeat(values, sizes)


def isotonic_fit_1d(x, y, w=None) -> Tuple[np.ndarray, np.ndarray]:
    """Fit a monotone step function of ``y`` on ``x``.

    Equal ``x`` values are pooled first. Returns strictly increasing
    breakpoints and their nondecreasing fitted values.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    keep = w > 0
    x, y, w = x[keep], y[keep], w[keep]
    if x.size == 0:
        raise InvalidInputError("isotonic fit needs positive total weight")
    ux, inverse = np.unique(x, return_inverse=True)
    wsum = np.bincount(inverse, weights=w)
    ymean = np.bincount(inverse, weights=w * y) / wsum
    return ux, pava(ymean, wsum)


def fit_isotonic(val: PredictionSet, weights=None) -> Isotonic:
    w = example_weights(weights, val)
    probs = val.probabilities()
    breakpoints = []
    for c in range(val.class_count):
        target = (val.labels == c).astype(float)
        breakpoints.append(isotonic_fit_1d(probs[:, c], target, w))
    return Isotonic(breakpoints, {"fit_size": int(val.n)})


# -- application --------------------------------------------------------------

def apply_map(cal, ps: PredictionSet, renormalize: bool = False) -> PredictionSet:
    """Transform every class column by its fitted one-vs-all map.

    Without ``renormalize`` the rows are left as they come out of the maps.
    With it, rows are divided by their sum and all-zero rows become uniform.
    """
    if cal_classes(cal) != ps.class_count:
        raise InvalidInputError("calibrator and predictions disagree on the class count")
    probs = ps.probabilities()
    out = np.empty_like(probs)
    if isinstance(cal, HistogramBinning):
        idx = bin_index(probs, cal.bin_count)
        for c in range(ps.class_count):
            out[:, c] = cal.tables[c, idx[:, c]]
    elif isinstance(cal, Isotonic):
        for c, (xs, ys) in enumerate(cal.breakpoints):
            out[:, c] = np.interp(probs[:, c], xs, ys)
    if not renormalize:
        return PredictionSet(out, ps.labels, ScoreKind.OVR)
    sums = out.sum(axis=1, keepdims=True)
    zero = sums[:, 0] <= 0.0
    out[zero] = 1.0 / ps.class_count
    sums[zero] = 1.0
    return PredictionSet(out / sums, ps.labels, ScoreKind.PROBABILITIES)


def cal_classes(cal) -> int:
    if isinstance(cal, HistogramBinning):
        return cal.tables.shape[0]
    if isinstance(cal, Isotonic):
        return len(cal.breakpoints)
    raise InvalidInputError(f"apply_map does not handle {type(cal).__name__}")


def fit(method, val: PredictionSet, *, objective=Objective.NLL, bins: int = DEFAULT_BINS,
        weights=None):
    method = Method(method)
    if method is Method.IDENTITY:
        return Identity({"fit_size": int(val.n)})
    if method is Method.TEMPERATURE:
        return fit_temperature(val, objective, weights)
    if method is Method.HISTOGRAM:
        return fit_histogram_binning(val, bins, weights)
    return fit_isotonic(val, weights)


def calibrate(cal, ps: PredictionSet, renormalize: bool = False) -> PredictionSet:
    if isinstance(cal, Identity):
        return PredictionSet(ps.probabilities(), ps.labels,
                             ScoreKind.OVR if ps.kind is ScoreKind.OVR else ScoreKind.PROBABILITIES)
    if isinstance(cal, Temperature):
        return apply_temperature(cal, ps)
    return apply_map(cal, ps, renormalize)


# -- serialization ------------------------------------------------------------

def calibrator_to_dict(cal) -> dict:
    if isinstance(cal, Identity):
        params = {}
    elif isinstance(cal, Temperature):
        params = {"t": cal.t}
    elif isinstance(cal, HistogramBinning):
        params = {"tables": cal.tables.tolist(), "fallback": cal.fallback.tolist()}
    elif isinstance(cal, Isotonic):
        params = {"breakpoints": [{"scores": xs.tolist(), "values": ys.tolist()}
                                  for xs, ys in cal.breakpoints]}
    else:
        raise TypeError(f"not a calibrator: {cal!r}")
    return {
        "format": CALIBRATOR_FORMAT,
        "version": CALIBRATOR_VERSION,
        "variant": cal.method.value,
        "params": params,
        "metadata": dict(cal.metadata),
    }


def calibrator_from_dict(doc: dict):
    if doc.get("format") != CALIBRATOR_FORMAT:
        raise InvalidInputError("not a calibrator document")
    if doc.get("version") != CALIBRATOR_VERSION:
        raise InvalidInputError(f"unsupported calibrator version {doc.get('version')!r}")
    try:
        method = Method(doc["variant"])
        params, meta = doc["params"], doc.get("metadata", {})
        if method is Method.IDENTITY:
            return Identity(meta)
        if method is Method.TEMPERATURE:
            t = float(params["t"])
            if not t > 0:
                raise InvalidInputError("temperature must be positive")
            return Temperature(t, meta)
        if method is Method.HISTOGRAM:
            return HistogramBinning(np.asarray(params["tables"], dtype=float),
                                    np.asarray(params["fallback"], dtype=float), meta)
        return Isotonic([(np.asarray(b["scores"], dtype=float), np.asarray(b["values"], dtype=float))
                         for b in params["breakpoints"]], meta)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed calibrator document: {exc}") from exc


__all__ = [
    "FittedCalibrator",
    "HistogramBinning",
    "Identity",
    "Isotonic",
    "Method",
    "Objective",
    "Temperature",
    "apply_map",
    "apply_temperature",
    "calibrate",
    "calibrator_from_dict",
    "calibrator_to_dict",
    "fit",
    "fit_histogram_binning",
    "fit_isotonic",
    "fit_temperature",
    "golden_section",
    "isotonic_fit_1d",
    "pava",
]
