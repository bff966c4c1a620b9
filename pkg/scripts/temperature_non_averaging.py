"""Random environment temperature: compare the asymptotic beta with the average beta.

For beta uniform on two points {b, 4b} the limit temperature beta_3 is printed
next to E[beta] e_e / e_s and a short ergodic estimate.
"""
import argparse

import numpy as np

from randrep import ergodic, spin_spin
from randrep.distributions import FiniteSupport, ParameterDistribution, PointMass

ap = argparse.ArgumentParser()
ap.add_argument("--steps", type=int, default=50_000)
ap.add_argument("--seed", type=int, default=1)
args = ap.parse_args()

print(f"{'b':>6} {'E[beta]':>8} {'beta_3':>10} {'estimate':>10}")
for b in (0.25, 0.5, 1.0, 2.0):
    d = ParameterDistribution({"tau": PointMass(1.0), "beta": FiniteSupport((b, 4 * b), (0.5, 0.5)), "e_e": PointMass(1.0)})
    m = spin_spin.SpinSpinModel(1.0, 0.5, d)
    b3 = spin_spin.asymptotic_beta("random_beta", m)
    p0 = ergodic.evolve_expectations(np.eye(2) / 2, m, np.diag([1.0, 0.0]), args.steps, args.seed).mean()
    print(f"{b:6.2f} {2.5 * b:8.3f} {b3:10.5f} {-np.log((1 - p0) / p0):10.5f}")
