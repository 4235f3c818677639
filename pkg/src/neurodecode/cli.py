"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad config, missing inputs,
unknown branch), 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline, synth
from .pipeline import ConfigError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurodecode",
        description="Voxel-to-latent decoding: ridge fits, renormalized predictions, metric reports.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="cross-validate and fit branch models")
    fit.add_argument("--config", required=True)
    fit.add_argument("--branch", action="append", help="fit only this branch (repeatable)")

    predict = sub.add_parser("predict", help="predict and renormalize test features")
    predict.add_argument("--config", required=True)
    predict.add_argument("--branch", action="append")

    evaluate = sub.add_parser("evaluate", help="compute the metric report")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument("--out", required=True, help="report JSON path")

    export = sub.add_parser("export", help="bundle predicted features for a generation stack")
    export.add_argument("--config", required=True)
    export.add_argument("--out", required=True, help="bundle directory")
    export.add_argument("--branch", action="append")

    synth_cmd = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    synth_cmd.add_argument("--spec", required=True, help="synth spec JSON")
    synth_cmd.add_argument("--out", required=True, help="output directory")
    return parser


def _run(args) -> int:
    if args.command == "synth":
        spec = synth.SynthSpec.from_json(args.spec)
        paths = synth.write_dataset(synth.generate(spec), args.out)
        print(f"wrote synthetic dataset to {Path(args.out)} ({len(paths)} files)")
        return 0

    cfg = pipeline.load_config(args.config)
    if args.command == "fit":
        records = pipeline.fit_all(cfg, args.branch)
        for rec in records:
            print(f"fit {rec['branch']}: alpha={rec['alpha']:g}")
        return 0
    if args.command == "predict":
        records = pipeline.predict_all(cfg, args.branch)
        for rec in records:
            outcome = rec["prediction"]
            if outcome and "file" in outcome:
                print(f"predict {rec['branch']}: {outcome['file']} ({outcome['rows']} rows)")
            else:
                print(f"predict {rec['branch']}: skipped ({outcome['skipped']})")
        return 0
    if args.command == "evaluate":
        report = pipeline.evaluate(cfg)
        report.write(args.out)
        for label in pipeline.ALL_ROWS:
            entry = report.rows[label]
            if "value" in entry:
                print(f"{label}: {entry['value']:.6g}")
            else:
                print(f"{label}: skipped ({entry['skipped']})")
        if report.all_skipped:
            print("error: every metric was skipped", file=sys.stderr)
            return 2
        return 0
    if args.command == "export":
        desc = pipeline.export_conditioning(cfg, args.out, args.branch)
        print(f"wrote conditioning bundle descriptor {desc}")
        return 0
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return _run(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
