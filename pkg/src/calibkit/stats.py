"""Class-dispersion statistics of a label vector."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import InvalidInputError


@dataclass(frozen=True)
class DispersionStats:
    imbalance_ratio: float
    entropy: float
    simpson: float
    simpson_vs_balanced: float
    effective_classes: float
    classes_present: int

    def to_dict(self) -> dict:
        return asdict(self)


def dispersion(labels, class_count: int) -> DispersionStats:
    """Imbalance ratio, Shannon entropy (nats), Simpson index and its inverse.

    Classes with no examples are left out of every statistic.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise InvalidInputError("need at least one label")
    if labels.min() < 0 or labels.max() >= class_count:
        raise InvalidInputError(f"labels must lie in [0, {class_count})")
    counts = np.bincount(labels, minlength=class_count)
    counts = counts[counts > 0]
    p = counts / labels.size
    simpson = float(np.sum(p * p))
    return DispersionStats(
        imbalance_ratio=float(counts.max() / counts.min()),
        entropy=float(-np.sum(p * np.log(p))) + 0.0,
        simpson=simpson,
        simpson_vs_balanced=simpson * counts.size,
        effective_classes=1.0 / simpson,
        classes_present=int(counts.size),
    )
