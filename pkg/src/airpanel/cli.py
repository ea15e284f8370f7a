"""Command-line entry point: stage subcommands plus the full pipeline run.

Subcommands: ingest, build-sample, panel, metrics, instruments, estimate,
synth, report, run. Global flags --config/--out/--threads/--seed/--quarters
override config-file keys; the AIRPANEL_LOG environment variable sets the log
level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import load_run_config
from .errors import PipelineError, StageError
from .pipeline import run_pipeline, run_stage, stage_synth


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a run configuration file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, help="worker count for bootstrap replicates")
    parser.add_argument("--seed", type=int, help="seed for all randomness (overrides config)")
    parser.add_argument(
        "--quarters",
        help="comma-separated quarters to keep, e.g. '2' or '1,2,3,4'",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airpanel",
        description="Airline market-structure panel pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("ingest", "parse and validate raw input files"),
        ("build-sample", "construct the directional trip sample"),
        ("panel", "aggregate the carrier-market-period panel"),
        ("metrics", "compute market-period structure measures"),
        ("instruments", "construct excluded variables"),
        ("estimate", "fit the configured regressions"),
        ("report", "render fit outputs as text tables"),
        ("synth", "generate a synthetic input bundle"),
        ("run", "run the full pipeline and write a manifest"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    over: dict = {}
    if args.out is not None:
        over["out"] = args.out
    if args.threads is not None:
        over["threads"] = args.threads
    if args.seed is not None:
        over["seed"] = args.seed
    if args.quarters is not None:
        over["quarters"] = [int(q) for q in str(args.quarters).split(",") if q.strip()]
    return over


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=os.environ.get("AIRPANEL_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_run_config(args.config, _overrides(args))
        if args.command == "run":
            doc = run_pipeline(cfg)
            print(json.dumps({"out": str(cfg.out_dir), "stages": len(doc["stages"])}))
        elif args.command == "synth":
            entry = stage_synth(cfg)
            print(json.dumps({"out": str(cfg.out_dir), "cells": entry["rows"]["cells"]}))
        else:
            manifest: list = []
            run_stage(args.command, cfg, manifest)
            if args.command == "report":
                print((cfg.out_dir / "report.txt").read_text())
            else:
                print(json.dumps(manifest[0]["rows"]))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
