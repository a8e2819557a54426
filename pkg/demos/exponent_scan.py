"""
Where does blue stop winning?
=============================

Scan q = a p^gamma on a grid of a for several p, find the a at which
P(origin blue) crosses 1/2, and regress log q* on log p.  For blue and
red both growing along lines with range 1 the slope should come out
near 3/2.  The planted curve checks the fitting alone.
"""

import sys

import numpy as np

from growthlab.harness import ExperimentParams, fit_exponent, phase_scan, planted_scan

rows = planted_scan([0.02, 0.01, 0.005, 0.0025], np.geomspace(0.01, 100, 21))
print("planted:", round(fit_exponent(rows, 1.5).gamma_hat, 4))

# the full run uses 400 replicates and takes several minutes
reps = int(sys.argv[1]) if len(sys.argv) > 1 else 40
params = ExperimentParams(p_grid=(0.02, 0.01, 0.005, 0.0025), a_grid=tuple(np.geomspace(0.2, 12, 7)),
                          gamma=1.5, replicates=reps, seed=7)
scan = phase_scan(params, "exponent_scan.csv",
                  progress=lambda r: print(f"p={r.p:<7g} a={r.a:<7.3g} P_blue={r.P_blue:.3f}"))
fit = fit_exponent(scan.rows, params.gamma)
print(f"gamma_hat {fit.gamma_hat:.3f} +- {fit.stderr:.3f}")
for f in scan.flags:
    print("non-monotone:", f)
