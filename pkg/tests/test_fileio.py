import json

import numpy as np
import pytest

from calibkit.calibrators import fit
from calibkit.core import PredictionSet, ScoreKind
from calibkit.fileio import (
    ParseError,
    format_cell,
    format_table,
    load_calibrator,
    parse_predictions,
    read_report,
    save_calibrator,
    write_predictions,
    write_report,
)
from calibkit.harness import EvalConfig, compare_methods, synthesize_predictions


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_csv(tmp_path):
    ps = parse_predictions(write(tmp_path, "p.csv", "label,score_0,score_1\n0,0.7,0.3\n"))
    assert ps.n == 1 and ps.class_count == 2 and ps.kind is ScoreKind.PROBABILITIES
    assert ps.scores.tolist() == [[0.7, 0.3]]


def test_parse_jsonl(tmp_path):
    p = write(tmp_path, "p.jsonl", '{"label": 2, "scores": [1.5, -0.5, 3]}\n\n{"label": 0, "scores": [0, 0, 0]}\n')
    ps = parse_predictions(p, score_kind="logits")
    assert ps.n == 2 and ps.class_count == 3 and ps.labels.tolist() == [2, 0]


@pytest.mark.parametrize("body,line", [
    ("label,score_0,score_1\n0,0.5,0.5\n1,0.7,0.4\n", 3),  # row sum 1.1
    ("label,score_0,score_1\n0,0.5\n", 2),                 # ragged
    ("label,score_0,score_1\n0,abc,0.5\n", 2),             # non-numeric
    ("label,score_0,score_1\n2,0.5,0.5\n", 2),             # label >= C
    ("label,score_0,score_1\n0.5,0.5,0.5\n", 2),           # fractional label
    ("", 1),                                               # empty file
    ("label,score_0,score_1\n", 1),                        # header only
    ("lbl,a,b\n0,0.5,0.5\n", 1),                           # bad header
])
def test_parse_errors_name_line(tmp_path, body, line):
    with pytest.raises(ParseError) as err:
        parse_predictions(write(tmp_path, "bad.csv", body))
    assert err.value.line == line
    assert f":{line}:" in str(err.value)


@pytest.mark.parametrize("body,line", [
    ('{"label": 0, "scores": [0.5, 0.5]}\n{"label": 0, "scores": [0.2, 0.3, 0.5]}\n', 2),
    ('{"label": 0, "scores": [0.5, 0.5]}\nnot json\n', 2),
    ('{"label": "0", "scores": [0.5, 0.5]}\n', 1),
    ('{"scores": [0.5, 0.5]}\n', 1),
])
def test_parse_jsonl_errors(tmp_path, body, line):
    with pytest.raises(ParseError) as err:
        parse_predictions(write(tmp_path, "bad.jsonl", body))
    assert err.value.line == line


@pytest.mark.parametrize("suffix", ["csv", "jsonl"])
@pytest.mark.parametrize("kind", ["logits", "probs"])
def test_round_trip(tmp_path, suffix, kind):
    val, _ = synthesize_predictions(200, 4, 1.5, seed=1)
    ps = val if kind == "logits" else PredictionSet(val.probabilities(), val.labels)
    path = tmp_path / f"out.{suffix}"
    write_predictions(ps, path)
    back = parse_predictions(path, score_kind=kind)
    np.testing.assert_allclose(back.scores, ps.scores, atol=1e-9, rtol=0)
    np.testing.assert_array_equal(back.labels, ps.labels)


def test_ovr_round_trip(tmp_path):
    ps = PredictionSet([[0.9, 0.8], [0.1, 0.0]], [0, 1], ScoreKind.OVR)
    write_predictions(ps, tmp_path / "o.csv")
    with pytest.raises(ParseError):
        parse_predictions(tmp_path / "o.csv", score_kind="probs")
    back = parse_predictions(tmp_path / "o.csv", score_kind="ovr")
    np.testing.assert_array_equal(back.scores, ps.scores)


def test_format_cell():
    assert format_cell(0.044, 0.0121) == "4.40 (01.21)"
    assert format_cell(0.3509, 0.0094) == "35.09 (00.94)"
    assert format_cell(1.2345, 0.01, percent=False) == "1.2345 (0.0100)"
    assert format_cell(None, None) == "n/a"


@pytest.fixture
def report():
    val, test = synthesize_predictions(2000, 4, 2.0, seed=3)
    return compare_methods(test, val, ["temperature", "isotonic"], EvalConfig(replicates=4))


def test_report_json(tmp_path, report):
    write_report(report, tmp_path / "r.json", tmp_path / "r.txt")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["format"] == "calibkit.report" and doc["version"] == 1
    for name in ("original", "temperature", "isotonic"):
        assert set(doc["methods"][name]["metrics"]["ece"]) >= {"mean", "std"}
    back = read_report(tmp_path / "r.json")
    assert back.to_dict() == report.to_dict()
    assert (tmp_path / "r.txt").read_text() == format_table(report)


def test_table_layout(report):
    lines = format_table(report).splitlines()
    assert lines[0].startswith("method") and "ECE>=50 (%)" in lines[0]
    assert {len(l) for l in lines[:5]} == {len(lines[0])}
    assert "25.00" in lines[2]


def test_calibrator_file_round_trip(tmp_path):
    val, test = synthesize_predictions(1000, 3, 2.0, seed=3)
    for method in ("temperature", "histogram", "isotonic", "identity"):
        cal = fit(method, val)
        save_calibrator(cal, tmp_path / "c.json")
        back = load_calibrator(tmp_path / "c.json")
        assert type(back) is type(cal)
