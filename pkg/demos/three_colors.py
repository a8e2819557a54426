"""
Three colors and empty rectangles
=================================

Blue on rows, red on columns, green in the L1 ball.  A little green
takes over; with almost none, large empty regions remain.  Without green
every empty component left at fixation is a rectangle.
"""

import sys

from growthlab.harness import GREEN, three_color_experiment, rectangle_trials

L = int(sys.argv[1]) if len(sys.argv) > 1 else 800
for pg in (0.002, 1e-5):
    est = three_color_experiment(0.001, 0.001, pg, L, replicates=5, seed=3)
    print(f"p_g={pg:g}: green {est.frac_mean[GREEN]:.3f}  empty {est.frac_mean[0]:.3f}")

reps = rectangle_trials(0.01, 1e-5, 300, 10, seed=1)
print("all rectangular:", all(r.all_rectangular for r in reps),
      "components:", sum(r.components for r in reps))
