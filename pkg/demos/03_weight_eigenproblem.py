"""
A positive weight rho with int |w(x, y)| rho(y) dy <= Lambda rho(x)
===================================================================

Power iteration answers the question on the box itself; for a homogeneous
kernel the Fourier construction gives a rho that also works on the whole
line (a normalised Gaussian plus a constant weight).
"""

import numpy as np

from snfield import kernels as kz
from snfield.grid import GridSpec, make_grid

g = make_grid(GridSpec(1, 10.0, 256))

for name, K in [("gaussian", kz.gaussian(g)), ("mexican hat", kz.mexican_hat(g))]:
    p = kz.solve_rho_power(K)
    f = kz.solve_rho_fourier(K)
    print(f"{name}: power Lambda = {p.lam:.6f} (residual {p.residual:.1e}),"
          f" Fourier Lambda = {f.lam:.6f} (residual {f.residual:.1e})")

# the rank-one kernel u(x) u(y) has eigenvector u and eigenvalue ||u||^2
K = kz.rank_one_gaussian(g)
p = kz.solve_rho_power(K)
u = np.exp(-g.axis ** 2 / 2)
print("rank one: Lambda =", p.lam, " sqrt(pi) =", np.sqrt(np.pi),
      " max |rho/u - const| =", np.ptp(np.asarray(p.rho) / u))
