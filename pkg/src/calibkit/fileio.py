"""Prediction files, report and calibrator serialization.

CSV prediction files carry a ``label,score_0,...,score_{C-1}`` header; JSONL
files carry one ``{"label": int, "scores": [...]}`` object per line. The
number of classes is always inferred from the score columns.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import List, Optional

import numpy as np

from .calibrators import calibrator_from_dict, calibrator_to_dict
from .core import ROW_SUM_TOL, InvalidInputError, PredictionSet, ScoreKind
from .harness import METRICS, EvaluationReport

PERCENT_METRICS = ("accuracy", "ece", "ece_odds")


class ParseError(InvalidInputError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def infer_format(path) -> str:
    return "jsonl" if str(path).lower().endswith((".jsonl", ".ndjson")) else "csv"


def _check_row(path, line: int, label, scores: List[float], C: Optional[int], kind: ScoreKind):
    if C is not None and len(scores) != C:
        raise ParseError(path, line, f"expected {C} scores, got {len(scores)}")
    if len(scores) < 2:
        raise ParseError(path, line, "need at least two score columns")
    if not all(math.isfinite(s) for s in scores):
        raise ParseError(path, line, "non-finite score")
    if label < 0 or label >= len(scores):
        raise ParseError(path, line, f"label {label} outside [0, {len(scores)})")
    if kind is not ScoreKind.LOGITS:
        if min(scores) < 0.0 or max(scores) > 1.0:
            raise ParseError(path, line, "probabilities must lie in [0, 1]")
    if kind is ScoreKind.PROBABILITIES:
        total = math.fsum(scores)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise ParseError(path, line, f"probabilities sum to {total!r}, not 1")


def _parse_csv(path, kind: ScoreKind):
    labels, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(path, 1, "empty file")
        header = [h.strip() for h in header]
        C = len(header) - 1
        if header[0] != "label" or header[1:] != [f"score_{c}" for c in range(C)]:
            raise ParseError(path, 1, "header must be label,score_0,...,score_{C-1}")
        for row in reader:
            line = reader.line_num
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != C + 1:
                raise ParseError(path, line, f"expected {C + 1} fields, got {len(row)}")
            try:
                label = int(row[0])
                scores = [float(f) for f in row[1:]]
            except ValueError as exc:
                raise ParseError(path, line, f"non-numeric field ({exc})") from None
            _check_row(path, line, label, scores, C, kind)
            labels.append(label)
            rows.append(scores)
    return labels, rows


def _parse_jsonl(path, kind: ScoreKind):
    labels, rows = [], []
    C = None
    with open(path) as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
                label, scores = obj["label"], obj["scores"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(path, line, f"malformed record ({exc})") from None
            if isinstance(label, bool) or not isinstance(label, int):
                raise ParseError(path, line, "label must be an integer")
            if not isinstance(scores, list) or not all(
                    isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores):
                raise ParseError(path, line, "scores must be a list of numbers")
            scores = [float(s) for s in scores]
            _check_row(path, line, label, scores, C, kind)
            C = len(scores)
            labels.append(label)
            rows.append(scores)
    return labels, rows


def parse_predictions(path, fmt: Optional[str] = None, score_kind=ScoreKind.PROBABILITIES) -> PredictionSet:
    """Read a prediction file into a :class:`PredictionSet`.

    Raises :class:`ParseError` naming the offending line.
    """
    kind = ScoreKind(score_kind)
    fmt = fmt or infer_format(path)
    if fmt == "csv":
        labels, rows = _parse_csv(path, kind)
    elif fmt == "jsonl":
        labels, rows = _parse_jsonl(path, kind)
    else:
        raise InvalidInputError(f"unknown prediction format {fmt!r}")
    if not rows:
        raise ParseError(path, 1, "no prediction rows")
    return PredictionSet(np.array(rows), np.array(labels, dtype=np.int64), kind)


def write_predictions(ps: PredictionSet, path, fmt: Optional[str] = None) -> None:
    fmt = fmt or infer_format(path)
    with open(path, "w", newline="") as fh:
        if fmt == "jsonl":
            for label, row in zip(ps.labels.tolist(), ps.scores.tolist()):
                fh.write(json.dumps({"label": label, "scores": row}) + "\n")
            return
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [f"score_{c}" for c in range(ps.class_count)])
        for label, row in zip(ps.labels.tolist(), ps.scores.tolist()):
            writer.writerow([label] + [repr(v) for v in row])


def dump_json(doc, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def write_report(report: EvaluationReport, path, table_path=None) -> None:
    dump_json(report.to_dict(), path)
    if table_path is not None:
        with open(table_path, "w") as fh:
            fh.write(format_table(report))


def read_report(path) -> EvaluationReport:
    with open(path) as fh:
        return EvaluationReport.from_dict(json.load(fh))


def save_calibrator(cal, path) -> None:
    dump_json(calibrator_to_dict(cal), path)


def load_calibrator(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except ValueError as exc:
            raise InvalidInputError(f"{path}: not valid JSON ({exc})") from None
    return calibrator_from_dict(doc)


def format_cell(mean: Optional[float], std: Optional[float], percent: bool = True) -> str:
    """``4.40 (01.21)`` style cell; percentages carry a zero-padded std."""
    if mean is None:
        return "n/a"
    if percent:
        return f"{100 * mean:.2f} ({100 * std:05.2f})"
    return f"{mean:.4f} ({std:.4f})"


def format_table(report: EvaluationReport) -> str:
    """Aligned plain-text table, one row per method."""
    header = ["method", "accuracy (%)", "random (%)", "ECE (%)", "ECE>=50 (%)", "NLL", "Brier"]
    rows = [header]
    random_cell = f"{100 * report.random_accuracy:.2f}"
    for name, res in report.methods.items():
        cells = [name]
        for key in METRICS:
            s = res.metrics[key]
            cells.append(format_cell(s.mean, s.std, key in PERCENT_METRICS))
            if key == "accuracy":
                cells.append(random_cell)
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for r in rows:
        first = r[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join([first] + rest))
    lines.insert(1, "-" * len(lines[0]))
    for name, msg in report.errors.items():
        lines.append(f"{name}: failed ({msg})")
    return "\n".join(lines) + "\n"
