"""Run every acceptance criterion and write the machine-readable report.

    python3 scripts/run_acceptance.py --out results
"""
import argparse
import sys

from randrep.cli import main

ap = argparse.ArgumentParser()
ap.add_argument("--suite", default="all")
ap.add_argument("--out", default="results")
args = ap.parse_args()
sys.exit(main(["validate", args.suite, "--out", args.out]))
