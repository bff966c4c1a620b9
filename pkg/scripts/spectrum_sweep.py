"""Moduli of the spin-spin RDO eigenvalues over tau, with the lattice tau = kT marked.

    python3 scripts/spectrum_sweep.py --out results/spectrum
"""
import argparse
import sys

from randrep.cli import main

ap = argparse.ArgumentParser()
ap.add_argument("--config", default="configs/random_tau.toml")
ap.add_argument("--out", default="results/spectrum")
args = ap.parse_args()
sys.exit(main(["spectrum", "--config", args.config, "--out", args.out]))
