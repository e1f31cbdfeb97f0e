"""Bootstrap evaluation, method comparison and a synthetic prediction generator."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .calibrators import Identity, Method, Objective, calibrate, fit
from .core import InvalidInputError, PredictionSet, ScoreKind, balanced_weights, softmax
from .metrics import DEFAULT_BINS, ODDS_THRESHOLD, all_metrics

logger = logging.getLogger(__name__)

METRICS = ("accuracy", "ece", "ece_odds", "nll", "brier")
REPORT_FORMAT = "calibkit.report"
REPORT_VERSION = 1
ORIGINAL = "original"


@dataclass(frozen=True)
class EvalConfig:
    replicates: int = 10
    seed: int = 0
    bins: int = DEFAULT_BINS
    threshold: float = ODDS_THRESHOLD
    balanced: bool = False
    objective: str = Objective.NLL.value

    def __post_init__(self):
        if self.replicates < 1:
            raise InvalidInputError("replicates must be >= 1")
        if not 1 <= self.bins <= 1000:
            raise InvalidInputError("bins must lie in [1, 1000]")
        if not 0.0 <= self.threshold < 1.0:
            raise InvalidInputError("threshold must lie in [0, 1)")
        object.__setattr__(self, "objective", Objective(self.objective).value)


@dataclass
class MetricSummary:
    mean: Optional[float]
    std: Optional[float]
    replicates: int
    excluded: int = 0


@dataclass
class BinSummary:
    lower: float
    upper: float
    replicates: int  # replicates in which the bin was nonempty
    accuracy_mean: Optional[float]
    accuracy_std: Optional[float]
    confidence_mean: Optional[float]
    confidence_std: Optional[float]
    mass_mean: float


@dataclass
class MethodResult:
    metrics: Dict[str, MetricSummary]
    bins: List[BinSummary]
    calibrator: dict = field(default_factory=dict)


@dataclass
class EvaluationReport:
    config: EvalConfig
    n_test: int
    class_count: int
    random_accuracy: float
    methods: Dict[str, MethodResult]
    errors: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "config": asdict(self.config),
            "n_test": self.n_test,
            "class_count": self.class_count,
            "random_accuracy": self.random_accuracy,
            "methods": {name: asdict(res) for name, res in self.methods.items()},
            "errors": dict(self.errors),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvaluationReport":
        if doc.get("format") != REPORT_FORMAT or doc.get("version") != REPORT_VERSION:
            raise InvalidInputError("not a version-1 evaluation report")
        methods = {}
        for name, res in doc["methods"].items():
            methods[name] = MethodResult(
                metrics={k: MetricSummary(**v) for k, v in res["metrics"].items()},
                bins=[BinSummary(**b) for b in res["bins"]],
                calibrator=res.get("calibrator", {}),
            )
        return cls(
            config=EvalConfig(**doc["config"]),
            n_test=doc["n_test"],
            class_count=doc["class_count"],
            random_accuracy=doc["random_accuracy"],
            methods=methods,
            errors=doc.get("errors", {}),
        )


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent PCG64 stream for one replicate, keyed by ``(seed, replicate)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replicate,))))


def bootstrap_indices(n: int, seed: int, replicate: int) -> np.ndarray:
    return replicate_rng(seed, replicate).integers(0, n, size=n)


def _mean_std(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    # centred on the first replicate so a constant metric gets std exactly 0
    dev = arr - arr[0]
    return float(arr[0] + dev.mean()), float(dev.std())


def _one_replicate(preds: Dict[str, PredictionSet], w: np.ndarray, cfg: EvalConfig, r: int):
    idx = bootstrap_indices(next(iter(preds.values())).n, cfg.seed, r)
    return {name: all_metrics(ps.subset(idx), w[idx], cfg.bins, cfg.threshold)
            for name, ps in preds.items()}


def _summarize(rows: List[dict], bins: int) -> Tuple[Dict[str, MetricSummary], List[BinSummary]]:
    metrics = {}
    for key in METRICS:
        vals = [row[key] for row in rows if row[key] is not None]
        mean, std = _mean_std(vals)
        metrics[key] = MetricSummary(mean, std, len(vals), len(rows) - len(vals))
    summaries = []
    for k in range(bins):
        stats = [row["curve"].bins[k] for row in rows]
        filled = [b for b in stats if not b.empty]
        acc_mean, acc_std = _mean_std([b.mean_accuracy for b in filled])
        conf_mean, conf_std = _mean_std([b.mean_confidence for b in filled])
        mass = float(np.mean([b.weight_mass / row["curve"].total_weight for b, row in zip(stats, rows)]))
        summaries.append(BinSummary(stats[0].lower, stats[0].upper, len(filled),
                                    acc_mean, acc_std, conf_mean, conf_std, mass))
    return metrics, summaries


def bootstrap_evaluate(test: PredictionSet, calibrators=None, cfg: EvalConfig = EvalConfig(),
                       workers: Optional[int] = None, renormalize: bool = False) -> EvaluationReport:
    """Metrics of every method, as mean and population std over bootstrap replicates.

    ``calibrators`` maps method names to fitted calibrators (a bare sequence
    is keyed by each calibrator's method name). The uncalibrated predictions
    are always reported under ``"original"``. Balanced class weights, when
    enabled, come from the full test set and are reused unchanged by every
    replicate.
    """
    if calibrators is None:
        calibrators = {}
    elif not isinstance(calibrators, Mapping):
        calibrators = {c.method.value: c for c in calibrators}
    cals = {ORIGINAL: Identity()}
    cals.update(calibrators)

    preds = {name: calibrate(cal, test, renormalize) for name, cal in cals.items()}
    if cfg.balanced:
        w = balanced_weights(test.labels, test.class_count).per_example(test.labels)
    else:
        w = np.ones(test.n)

    reps = range(cfg.replicates)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda r: _one_replicate(preds, w, cfg, r), reps))
    else:
        results = [_one_replicate(preds, w, cfg, r) for r in reps]

    methods = {}
    for name, cal in cals.items():
        rows = [res[name] for res in results]
        metrics, bins = _summarize(rows, cfg.bins)
        if metrics["ece_odds"].excluded:
            logger.warning("%s: %d replicate(s) had no prediction >= %s",
                           name, metrics["ece_odds"].excluded, cfg.threshold)
        meta = {"variant": cal.method.value, **cal.metadata}
        if renormalize and cal.method in (Method.HISTOGRAM, Method.ISOTONIC):
            meta["renormalize"] = True
        methods[name] = MethodResult(metrics, bins, meta)
    return EvaluationReport(cfg, test.n, test.class_count, 1.0 / test.class_count, methods)


def synthesize_predictions(n: int, class_count: int, t_true: float, seed: int):
    """Standard-normal logits with labels drawn from ``softmax(logits / t_true)``.

    Returns ``(val, test)``: the first ``n // 2`` rows and the rest.
    """
    if n < 2 or class_count < 2:
        raise InvalidInputError("need n >= 2 and at least two classes")
    if not t_true > 0:
        raise InvalidInputError("t_true must be positive")
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((n, class_count))
    cdf = np.cumsum(softmax(logits / t_true), axis=1)
    u = rng.random(n)
    labels = np.minimum((u[:, None] >= cdf).sum(axis=1), class_count - 1)
    half = n // 2
    return (PredictionSet(logits[:half], labels[:half], ScoreKind.LOGITS),
            PredictionSet(logits[half:], labels[half:], ScoreKind.LOGITS))


def compare_methods(test: PredictionSet, val: PredictionSet, methods: Sequence,
                    cfg: EvalConfig = EvalConfig(), renormalize: bool = False) -> EvaluationReport:
    """Fit every method on ``val`` and evaluate all of them on ``test``.

    A method that fails to fit is reported under ``errors``; the others go on.
    """
    if val.class_count != test.class_count:
        raise InvalidInputError("validation and test sets disagree on the class count")
    w = balanced_weights(val.labels, val.class_count).per_example(val.labels) if cfg.balanced else None
    fitted, errors = {}, {}
    for method in methods:
        method = Method(method)
        if method is Method.IDENTITY:
            continue
        try:
            fitted[method.value] = fit(method, val, objective=cfg.objective, bins=cfg.bins, weights=w)
        except Exception as exc:  # noqa: BLE001 - reported per method
            logger.error("fitting %s failed: %s", method.value, exc)
            errors[method.value] = str(exc)
    report = bootstrap_evaluate(test, fitted, cfg, renormalize=renormalize)
    report.errors.update(errors)
    return report

