"""
Blocking scaffolds against a red cone
=====================================

A scaffold of boxes sits below the x-axis.  Each box has an activation
region on its right; one blue site there draws a blue line across the box
before red reaches its rows.  Red starts as a solid cone below the
scaffold.  The run covers time C/p.
"""

from growthlab.scaffold import (Cone, build_scaffold, is_successful, plant_field, protection_certificate)
from growthlab.fileio import write_image

p = 1e-2
base = build_scaffold((0, 0), p, alpha=0.5, alpha_bar=0.75, m=5)
sc = base.shifted(0, base.rule(-base.sigma))
print(f"{len(sc.boxes)} boxes in {sc.ell_max + 1} layers, height {sc.total_height()} rows")

blue = plant_field([sc])
print("successful:", is_successful(sc, blue).ok)

cone = Cone(*sc.cone_apex())
rep = protection_certificate([sc], [cone], blue, p, C=27)
print(rep.summary())

# knock out one activation region: that box loses its line and red gets through
bad = protection_certificate([sc], [cone], blue, p, C=27, suppress=[(2, 1)])
print("suppressed (2, 1):", bad.first_violation)

# same scaffold, blue frozen to one segment per box
print(protection_certificate([sc], [cone], blue, p, C=27, mode="static").summary())

write_image("blocking.ppm", rep.result.lattice)
