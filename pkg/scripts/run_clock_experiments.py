#!/usr/bin/env python3
"""Run the eight-target clock task over the stock condition grid.

Writes one directory per condition (trajectory log, Listing clouds,
metrics.json) plus a summary.json, same layout as `wristsim run`.
"""
import argparse
import sys

from dataclasses import replace

from wristsim.cli import run_and_emit
from wristsim.config import ExperimentConfig, default_conditions


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/clock", help="output directory")
    ap.add_argument(
        "--gravity", choices=["on", "off", "both"], default="both",
        help="restrict the gravity conditions",
    )
    args = ap.parse_args(argv)

    keep = tuple(
        cond for cond in default_conditions()
        if cond.kind == "clock"
        and (args.gravity == "both" or cond.gravity == (args.gravity == "on"))
    )
    config = replace(ExperimentConfig(), conditions=keep, output_dir=args.out)
    return run_and_emit(config)


if __name__ == "__main__":
    sys.exit(main())
