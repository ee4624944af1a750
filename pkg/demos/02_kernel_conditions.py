"""
Which kernels are integrable enough?
====================================

Conditions are evaluated on the box and on the doubled box at the same mesh.
A quantity that is finite on the whole space settles; one that is infinite
keeps growing with the box.
"""

from snfield import kernels as kz
from snfield.grid import GridSpec, make_grid

g = make_grid(GridSpec(1, 10.0, 256))

# a translation-invariant Gaussian: row integrals are bounded, the double integral is not
for cond in ("C1", "C2", "C2prime"):
    r = kz.check_condition(kz.gaussian(g), cond)
    print(f"gaussian  {cond:8s} {r.verdict.value:24s} L: {r.value_at_L:9.4f}  2L: {r.value_at_2L:9.4f}")

# Hoelder regularity of w in L1, alpha = 1
r = kz.check_condition(kz.gaussian(g), "C3prime", alpha=1.0)
print("gaussian  C3prime ", r.verdict.value, round(r.constant, 4))

# w(x, y) = exp(-|y|) / (1 + |x|)^2 has a finite double integral of w^2,
# while sup_y int |w(x, y)| dx grows logarithmically with the box
big = make_grid(GridSpec(1, 200.0, 1600))
ce = kz.separable_decay(big)
for cond in ("C1", "C2"):
    r = kz.check_condition(ce, cond)
    print(f"decay     {cond:8s} {r.verdict.value:24s} ratio 2L/L: {r.ratio:.3f}")
