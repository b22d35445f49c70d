#!/usr/bin/env python3
"""Run the single-target trial with stiffness and torsion stepped mid-reach.

The wrist reaches out to the top target while K steps 10 -> 8 -> 1 kN.m/rad
and phi steps 0 -> -25 deg, then returns to center under the final tuning.
Emits the same per-condition files as `wristsim run`.
"""
import argparse
import sys

from dataclasses import replace

from wristsim.cli import run_and_emit
from wristsim.config import ExperimentConfig


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/retune", help="output directory")
    args = ap.parse_args(argv)

    config = ExperimentConfig()
    retune = tuple(c for c in config.conditions if c.kind == "retune")
    config = replace(config, conditions=retune, output_dir=args.out)
    return run_and_emit(config)


if __name__ == "__main__":
    sys.exit(main())
