"""Exit criteria of the toolkit, one test per criterion, at fixed tolerances."""

import math
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from _oracles import brute_force_ece, brute_force_isotonic
from calibkit.calibrators import apply_temperature, fit_temperature, pava
from calibkit.cli import main
from calibkit.core import PredictionSet, balanced_weights, view
from calibkit.fileio import load_calibrator, parse_predictions, read_report
from calibkit.harness import EvalConfig, bootstrap_evaluate, synthesize_predictions
from calibkit.metrics import accuracy, all_metrics, ece_odds, expected_calibration_error
from calibkit.stats import dispersion


def test_ece_matches_brute_force_oracle():
    rng = np.random.default_rng(20240501)
    cases = []
    for _ in range(50):
        n = int(rng.integers(1, 1001))
        C = int(rng.integers(2, 11))
        probs = rng.dirichlet(np.ones(C) * rng.uniform(0.1, 3.0), size=n)
        cases.append(PredictionSet(probs, rng.integers(0, C, n)))
    start = time.perf_counter()
    got = [expected_calibration_error(ps, None, 15) for ps in cases]
    elapsed = time.perf_counter() - start
    for ps, value in zip(cases, got):
        assert abs(value - brute_force_ece(ps.scores, ps.labels, 15)) <= 1e-12
    assert elapsed < 1.0


@pytest.mark.parametrize("C", [2, 3, 4, 7, 10])
def test_prior_predictor_has_zero_ece(C):
    rng = np.random.default_rng(C)
    labels = rng.integers(0, C, 997)
    prior = np.bincount(labels, minlength=C) / labels.size
    ps = PredictionSet(np.tile(prior, (labels.size, 1)), labels)
    assert expected_calibration_error(ps) == 0.0


def test_temperature_recovery():
    start = time.perf_counter()
    # 10 000 fitting examples; the other half is the held-out test split
    val, test = synthesize_predictions(20_000, 4, 2.5, seed=0)
    fitted = {obj: fit_temperature(val, obj) for obj in ("nll", "brier")}
    for cal in fitted.values():
        assert abs(cal.t / 2.5 - 1) <= 0.05, cal.t
    report = bootstrap_evaluate(test, {"ts": fitted["nll"]}, EvalConfig(seed=0))
    before = report.methods["original"].metrics["ece"].mean
    after = report.methods["ts"].metrics["ece"].mean
    assert after < before
    for cal in fitted.values():
        out = apply_temperature(cal, test)
        assert np.array_equal(np.argmax(out.scores, axis=1), np.argmax(test.scores, axis=1))
    assert time.perf_counter() - start < 2.0


def test_pava_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        y = rng.uniform(0, 1, n) if rng.random() < 0.5 else rng.integers(0, 2, n).astype(float)
        w = rng.uniform(0.05, 5, n)
        np.testing.assert_allclose(pava(y, w), brute_force_isotonic(list(y), list(w)), atol=1e-9, rtol=0)


def test_ece_and_ece_odds_diverge():
    # 90% of the mass below 0.5 confidence and calibrated; the tail above 0.5 overconfident
    bulk = [[0.4, 0.2, 0.2, 0.2]] * 900
    tail = [[0.9, 0.04, 0.03, 0.03]] * 100
    labels = [0] * 360 + [1] * 540 + [0] * 60 + [1] * 40
    ps = PredictionSet(bulk + tail, labels)
    assert expected_calibration_error(ps) < 0.05
    assert ece_odds(ps) > 0.15


def test_balanced_weighting_identities():
    rng = np.random.default_rng(3)
    labels = np.repeat(np.arange(5), 60)
    ps = PredictionSet(rng.dirichlet(np.ones(5), labels.size), labels)
    w = balanced_weights(labels, 5).per_example(labels)
    plain, weighted = all_metrics(ps), all_metrics(ps, w)
    for key in ("accuracy", "ece", "ece_odds", "nll", "brier"):
        assert abs(plain[key] - weighted[key]) <= 1e-12

    skewed = np.array([0] * 90 + [1] * 10)
    blind = PredictionSet(np.tile([0.7, 0.3], (100, 1)), skewed)
    wb = balanced_weights(skewed, 2).per_example(skewed)
    assert accuracy(view(blind)) == pytest.approx(0.9, abs=1e-12)
    assert accuracy(view(blind), wb) == pytest.approx(0.5, abs=1e-12)


def test_dispersion_identities():
    rng = np.random.default_rng(11)
    for _ in range(200):
        C = int(rng.integers(2, 20))
        labels = rng.integers(0, C, int(rng.integers(1, 2000)))
        s = dispersion(labels, C)
        assert abs(s.effective_classes * s.simpson - 1) <= 1e-12
    for C in (2, 3, 4, 10):
        s = dispersion(np.arange(50 * C) % C, C)
        assert s.entropy == pytest.approx(math.log(C), abs=1e-12)
        assert s.simpson == pytest.approx(1 / C, abs=1e-12)


def test_determinism(tmp_path):
    main(["synth", "--n", "2000", "--classes", "3", "--temperature", "1.5", "--seed", "4",
          "--out-val", str(tmp_path / "v.csv"), "--out-test", str(tmp_path / "t.csv")])
    for name in ("a.json", "b.json"):
        assert main(["evaluate", "--predictions", str(tmp_path / "t.csv"), "--scores", "logits",
                     "--seed", "123", "--balanced", "--output", str(tmp_path / name),
                     "--table", str(tmp_path / "table.txt")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    labels = np.zeros(50, dtype=int)
    const = PredictionSet(np.tile([0.6, 0.4], (50, 1)), labels)
    metrics = bootstrap_evaluate(const, None, EvalConfig(seed=9)).methods["original"].metrics
    for key in ("accuracy", "ece", "ece_odds", "nll", "brier"):
        assert metrics[key].std == 0.0


def test_end_to_end_cli(tmp_path):
    p = {k: str(tmp_path / v) for k, v in dict(val="val.csv", test="test.csv", out="cal.csv",
                                              cal="cal.json", before="before.json", after="after.json",
                                              svg="diagram.svg").items()}
    start = time.perf_counter()
    steps = [
        ["synth", "--n", "10000", "--classes", "4", "--temperature", "2.5", "--seed", "0",
         "--out-val", p["val"], "--out-test", p["test"]],
        ["calibrate", "--fit", p["val"], "--apply", p["test"], "--method", "temperature",
         "--objective", "nll", "--output", p["out"], "--save-calibrator", p["cal"]],
        ["evaluate", "--predictions", p["test"], "--scores", "logits", "--seed", "0",
         "--output", p["before"], "--table", str(tmp_path / "before.txt")],
        ["evaluate", "--predictions", p["out"], "--scores", "probs", "--seed", "0",
         "--output", p["after"], "--table", str(tmp_path / "after.txt")],
        ["diagram", "--predictions", p["test"], "--scores", "logits", "--calibrator", p["cal"],
         "--seed", "0", "--svg", p["svg"]],
    ]
    for argv in steps:
        assert main(argv) == 0, argv[0]
    elapsed = time.perf_counter() - start

    assert parse_predictions(p["val"], score_kind="logits").n == 5000
    assert parse_predictions(p["test"], score_kind="logits").n == 5000
    assert parse_predictions(p["out"], score_kind="probs").n == 5000
    assert load_calibrator(p["cal"]).t > 0
    before = read_report(p["before"]).methods["original"].metrics["ece"].mean
    after = read_report(p["after"]).methods["original"].metrics["ece"].mean
    assert after < before
    assert ET.parse(p["svg"]).getroot().tag.endswith("svg")
    assert elapsed < 5.0
