"""
Blue, red and empty phases on a torus
=====================================

Blue spreads along rows, red along columns, both at rate 1.  With the
same blue density, raising the red density turns a mostly empty final
state into a mostly red one.
"""

import sys

from growthlab import run_to_fixation, sample_initial
from growthlab.fileio import load_config, write_image

# 800 x 800 like the configs; pass a smaller side for a quick look
side = int(sys.argv[1]) if len(sys.argv) > 1 else 800

for name in ("empty_phase", "red_phase"):
    cfg = load_config(f"demos/configs/{name}.ini")
    model = cfg.model.with_(width=side, height=side)
    res = run_to_fixation(sample_initial(model))
    fr = res.fractions()
    print(f"{name}: q={model.densities[1]}  empty {fr[0]:.3f}  blue {fr[1]:.3f}  red {fr[2]:.3f}"
          f"  fixed at t={float(res.fixation_time):g}")
    write_image(f"{name}.ppm", res.lattice)
