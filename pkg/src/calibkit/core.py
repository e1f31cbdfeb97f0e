"""Prediction data model and the primitive transforms shared by every module."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-6
# rows closer to 1 than this are stored untouched, so exact inputs stay exact
_RENORM_EPS = 1e-12
LOGIT_CLIP = 1e-12


class CalibkitError(Exception):
    """Base class for toolkit errors."""


class InvalidInputError(CalibkitError, ValueError):
    """Input data violates a documented precondition."""


class ScoreKind(str, enum.Enum):
    LOGITS = "logits"
    PROBABILITIES = "probs"
    # one-vs-rest calibrated scores: entries in [0, 1], rows need not sum to 1
    OVR = "ovr"


@dataclass(frozen=True)
class PredictionSet:
    """An ``n x C`` score matrix plus true labels.

    ``scores`` hold logits or probabilities depending on ``kind``. Probability
    rows are validated against :data:`ROW_SUM_TOL` and renormalized when they
    drift from 1.
    """

    scores: np.ndarray
    labels: np.ndarray
    kind: ScoreKind = ScoreKind.PROBABILITIES
    class_count: int = field(default=0)

    def __post_init__(self):
        kind = ScoreKind(self.kind)
        scores = np.array(self.scores, dtype=float)
        labels = np.asarray(self.labels)
        if scores.ndim != 2:
            raise InvalidInputError(f"scores must be a 2-d matrix, got shape {scores.shape}")
        n, c = scores.shape
        if n < 1:
            raise InvalidInputError("a prediction set needs at least one example")
        if c < 2:
            raise InvalidInputError("need at least two classes")
        if self.class_count not in (0, c):
            raise InvalidInputError(f"class_count={self.class_count} but scores have {c} columns")
        if labels.ndim != 1 or labels.shape[0] != n:
            raise InvalidInputError(f"expected {n} labels, got shape {labels.shape}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            as_int = labels.astype(np.int64)
            if not np.array_equal(as_int, labels):
                raise InvalidInputError("labels must be integers")
            labels = as_int
        labels = labels.astype(np.int64)
        if labels.min() < 0 or labels.max() >= c:
            raise InvalidInputError(f"labels must lie in [0, {c})")
        if not np.all(np.isfinite(scores)):
            raise InvalidInputError("scores contain non-finite values")
        if kind is not ScoreKind.LOGITS:
            if scores.min() < 0.0 or scores.max() > 1.0:
                raise InvalidInputError("probabilities must lie in [0, 1]")
        if kind is ScoreKind.PROBABILITIES:
            sums = scores.sum(axis=1)
            bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
            if bad.size:
                i = int(bad[0])
                raise InvalidInputError(f"row {i} sums to {sums[i]!r}, not 1 (tol {ROW_SUM_TOL})")
            drift = np.abs(sums - 1.0) > _RENORM_EPS
            if drift.any():
                scores[drift] /= sums[drift, None]
        scores.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "class_count", c)

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    def probabilities(self) -> np.ndarray:
        """Probability matrix, applying softmax to logits."""
        if self.kind is ScoreKind.LOGITS:
            return softmax(self.scores)
        return self.scores

    def logits(self, eps: float = LOGIT_CLIP) -> np.ndarray:
        if self.kind is ScoreKind.LOGITS:
            return self.scores
        return to_logits(self.scores, eps)

    def subset(self, idx) -> "PredictionSet":
        return PredictionSet(self.scores[idx], self.labels[idx], self.kind)


@dataclass(frozen=True)
class PredictionView:
    predicted: np.ndarray
    confidence: np.ndarray
    correct: np.ndarray


@dataclass(frozen=True)
class ClassWeights:
    per_class: np.ndarray

    def per_example(self, labels) -> np.ndarray:
        return self.per_class[np.asarray(labels)]


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("softmax input contains non-finite values")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def view(ps: PredictionSet) -> PredictionView:
    """Predicted label, confidence and correctness of every row.

    ``np.argmax`` returns the first maximal index, so ties go to the lowest
    class index.
    """
    probs = ps.probabilities()
    predicted = np.argmax(probs, axis=1)
    confidence = probs[np.arange(ps.n), predicted]
    return PredictionView(predicted, confidence, predicted == ps.labels)


def average_ensemble(members: Sequence) -> np.ndarray:
    """Elementwise mean of several probability matrices (e.g. MC-dropout passes)."""
    if len(members) == 0:
        raise InvalidInputError("cannot average an empty ensemble")
    arrays = [np.asarray(m, dtype=float) for m in members]
    shape = arrays[0].shape
    for a in arrays:
        if a.shape != shape:
            raise InvalidInputError(f"member shape {a.shape} does not match {shape}")
    ref = arrays[0]
    # offset from the first member keeps identical members exact
    return ref + np.mean(np.stack(arrays) - ref, axis=0)


def balanced_weights(labels, class_count: int) -> ClassWeights:
    """Per-class weights giving every present class the same total mass.

    Absent classes get weight 0 and do not count towards the divisor, so the
    per-example weights always sum to ``n``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise InvalidInputError("need at least one label")
    if labels.min() < 0 or labels.max() >= class_count:
        raise InvalidInputError(f"labels must lie in [0, {class_count})")
    counts = np.bincount(labels, minlength=class_count).astype(float)
    present = counts > 0
    per_class = np.zeros(class_count)
    per_class[present] = labels.size / (present.sum() * counts[present])
    return ClassWeights(per_class)


def to_logits(probs, eps: float = LOGIT_CLIP) -> np.ndarray:
    if not 0.0 < eps <= 1e-6:
        raise InvalidInputError("eps must lie in (0, 1e-6]")
    return np.log(np.clip(np.asarray(probs, dtype=float), eps, 1.0))


def resolve_weights(weights, n: int) -> np.ndarray:
    """Normalize the ``weights`` argument accepted across the toolkit.

    ``None`` means uniform; a :class:`ClassWeights` needs labels, so callers
    pass it through :meth:`ClassWeights.per_example` first.
    """
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise InvalidInputError(f"expected {n} weights, got shape {w.shape}")
    if w.min() < 0 or not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite and nonnegative")
    return w


def example_weights(weights, ps: PredictionSet) -> np.ndarray:
    if isinstance(weights, ClassWeights):
        return weights.per_example(ps.labels)
    return resolve_weights(weights, ps.n)
