"""q from the small-sigma expansion against the averaged-block fixed vector, as eps shrinks.

The error column should fall by about 8 per halving of eps.
"""
import numpy as np

from randrep import spin_fermion as sf
from randrep.distributions import PointMass, Uniform

d = sf.default_density()
print(f"{'eps':>7} {'q_exp':>12} {'q_direct':>12} {'error':>10} {'budget':>10}")
prev = None
for eps in (0.2, 0.1, 0.05, 0.025, 0.0125):
    p = sf.SpinFermionParams(0.05, 1.0, Uniform(0.0, 2 * eps), PointMass(1.0), d)
    qe, qd = sf.q_probability(p), sf.q_direct(p)
    err = abs(qe - qd)
    ratio = "" if prev is None else f"  x{prev / err:.1f}"
    print(f"{eps:7.4f} {qe:12.8f} {qd:12.8f} {err:10.2e} {sf.expansion_budget(p):10.2e}{ratio}")
    prev = err
