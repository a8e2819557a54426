"""
Layered obstacles in the continuum
==================================

Each layer is the previous one stretched by lambda.  The breakthrough
time of red through the canonical obstacle set is alpha * h.
"""

from growthlab.continuum import (ContinuumConfig, Segment, breakthrough, canonical_obstacles, layer_table,
                                 triples)

cfg = ContinuumConfig(alpha=1.0, alpha_bar=1.25, m=3)
print("lambda", cfg.lam, "sigma", round(cfg.sigma, 4))
for row in layer_table(cfg, 5):
    print("{l:>2}  f={f:9.5f}  g={g:9.5f}  h={h:9.5f}  S={S:9.5f}".format(**row))

# three boxes of width g with gaps of length h; red starts on a segment of length f
for t in triples(cfg, 3):
    time, (lo, hi) = breakthrough(canonical_obstacles(t, cfg.m), Segment(0, 0.0, t.f), cfg.alpha)
    print(f"f={t.f:.4f}: breakthrough at {time:.6f} (alpha*h = {cfg.alpha * t.h:.6f}), reach [{lo:.3f}, {hi:.3f}]")

# slower red pays proportionally more
t = triples(cfg, 0)[0]
print("at alpha_bar:", breakthrough(canonical_obstacles(t, 3), Segment(0, 0.0, t.f), cfg.alpha_bar)[0])
