"""Command-line interface: ``calibkit {evaluate,calibrate,diagram,stats,synth}``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .calibrators import Method, Objective, Temperature, calibrate, fit
from .core import CalibkitError, ScoreKind, balanced_weights, view
from .fileio import (
    format_table,
    load_calibrator,
    parse_predictions,
    save_calibrator,
    write_predictions,
    write_report,
)
from .harness import EvalConfig, bootstrap_evaluate, synthesize_predictions
from .metrics import DEFAULT_BINS, bin_predictions
from .stats import dispersion
from .svg import diagram_spec, render_diagram

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("calibkit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_input(p, required=True):
    p.add_argument("--predictions", required=required, help="CSV or JSONL prediction file")
    p.add_argument("--scores", choices=[k.value for k in ScoreKind], default="probs",
                   help="what the score columns hold (default: probs)")
    p.add_argument("--format", choices=["csv", "jsonl"], help="file format (default: from extension)")


def _add_bootstrap(p):
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--bootstrap", type=int, default=10, help="number of bootstrap replicates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--balanced", action="store_true", help="weight examples so classes contribute equally")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="calibkit", description="Calibration evaluation and post-hoc recalibration.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="bootstrap accuracy/ECE/ECE>=50/NLL/Brier")
    _add_input(p)
    _add_bootstrap(p)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--calibrator", help="also evaluate this saved calibrator")
    p.add_argument("--output", help="JSON report path")
    p.add_argument("--table", help="write the text table here instead of stdout")

    p = sub.add_parser("calibrate", help="fit a calibrator on one file and apply it to another")
    p.add_argument("--fit", required=True, help="validation predictions")
    p.add_argument("--apply", required=True, help="predictions to calibrate")
    p.add_argument("--scores", choices=[k.value for k in ScoreKind], default="logits")
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--method", choices=[m.value for m in Method if m is not Method.IDENTITY],
                   required=True)
    p.add_argument("--objective", choices=[o.value for o in Objective], default="nll")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--balanced", action="store_true")
    p.add_argument("--renormalize", action="store_true")
    p.add_argument("--output", required=True)
    p.add_argument("--save-calibrator")

    p = sub.add_parser("diagram", help="render an SVG reliability diagram")
    _add_input(p)
    _add_bootstrap(p)
    p.add_argument("--calibrator")
    p.add_argument("--title")
    p.add_argument("--svg", required=True)

    p = sub.add_parser("stats", help="class-dispersion statistics of the labels")
    p.add_argument("--predictions", required=True, nargs="+")
    p.add_argument("--scores", choices=[k.value for k in ScoreKind], default="probs")
    p.add_argument("--format", choices=["csv", "jsonl"])

    p = sub.add_parser("synth", help="write synthetic validation/test logits")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--temperature", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-val", required=True)
    p.add_argument("--out-test", required=True)
    return parser


def _weights(ps, balanced):
    return balanced_weights(ps.labels, ps.class_count).per_example(ps.labels) if balanced else None


def cmd_evaluate(args):
    ps = parse_predictions(args.predictions, args.format, args.scores)
    cfg = EvalConfig(args.bootstrap, args.seed, args.bins, args.threshold, args.balanced)
    cals = {"calibrated": load_calibrator(args.calibrator)} if args.calibrator else {}
    report = bootstrap_evaluate(ps, cals, cfg)
    if args.output:
        write_report(report, args.output)
    table = format_table(report)
    if args.table:
        with open(args.table, "w") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)


def cmd_calibrate(args):
    val = parse_predictions(args.fit, args.format, args.scores)
    test = parse_predictions(args.apply, args.format, args.scores)
    if val.class_count != test.class_count:
        raise CalibkitError("fit and apply files have different class counts")
    cal = fit(args.method, val, objective=args.objective, bins=args.bins,
              weights=_weights(val, args.balanced))
    out = calibrate(cal, test, args.renormalize)
    write_predictions(out, args.output)
    if args.save_calibrator:
        save_calibrator(cal, args.save_calibrator)
    if isinstance(cal, Temperature):
        log.info("temperature %.6g (%s)", cal.t, cal.metadata.get("objective"))
        if "warning" in cal.metadata:
            log.warning(cal.metadata["warning"])
    log.info("wrote %s scores to %s", out.kind.value, args.output)


def cmd_diagram(args):
    ps = parse_predictions(args.predictions, args.format, args.scores)
    cfg = EvalConfig(args.bootstrap, args.seed, args.bins, 0.5, args.balanced)
    if args.calibrator:
        cal = load_calibrator(args.calibrator)
        report = bootstrap_evaluate(ps, {"calibrated": cal}, cfg)
        result, shown = report.methods["calibrated"], calibrate(cal, ps)
    else:
        report = bootstrap_evaluate(ps, None, cfg)
        result, shown = report.methods["original"], ps
    curve = bin_predictions(view(shown), _weights(ps, args.balanced), args.bins, 0.0)
    render_diagram(diagram_spec(result.bins, curve, ps.class_count, title=args.title), args.svg)


def cmd_stats(args):
    for path in args.predictions:
        ps = parse_predictions(path, args.format, args.scores)
        doc = {"path": path, "n": ps.n, "class_count": ps.class_count,
               **dispersion(ps.labels, ps.class_count).to_dict()}
        sys.stdout.write(json.dumps(doc) + "\n")


def cmd_synth(args):
    val, test = synthesize_predictions(args.n, args.classes, args.temperature, args.seed)
    write_predictions(val, args.out_val)
    write_predictions(test, args.out_test)


COMMANDS = {
    "evaluate": cmd_evaluate,
    "calibrate": cmd_calibrate,
    "diagram": cmd_diagram,
    "stats": cmd_stats,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (CalibkitError, ValueError, OSError) as exc:
        print(f"calibkit: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
