"""
When red takes the origin
=========================

Red grows in the L1 ball, blue along rows.  Sample configurations in two
stages, look for the two local events that force red at the origin, and
confirm each hit with a full run.
"""

from growthlab.harness import red_wins_certificate

p = 0.01
for a in (1, 5, 25):
    hits = verified = 0
    for seed in range(300):
        res = red_wins_certificate(p, a * p**1.5, epsilon=0.5, seed=seed)
        if res.G and res.H:
            hits += 1
            verified += bool(res.verified)
    print(f"a={a:>2}: both events in {hits}/300, origin red in {verified}")

# one planted case: a lone red site and blue far from the axis
res = red_wins_certificate(p, 0.0, 0.5, marks=({(5, 3)}, {(-40, 1)}))
print(res)
