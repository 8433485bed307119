"""
Trees, incidence matrices and funnels
=====================================

A tour of the graph objects and the per-edge performance funnel.
"""

import numpy as np

from leadppc import graph, performance

# a chain of five agents where vertices 4 and 5 are leaders
chain = graph.make_chain(5, n_f=3)
dm = graph.derive_matrices(chain)
print("edges:", chain.edges, "leaders:", sorted(chain.leaders))
print("incidence D:\n", dm.D)

# the edge Laplacian of a tree is positive definite
print("eig(L_e):", np.round(np.linalg.eigvalsh(dm.L_e), 4))

# follower and leader rows of D; P = D_i^T D_i enters the certificate
print("D_i^T D_i:\n", dm.DiTDi)

# relative states on the edges and back again, vertex n pinned at 0
x = np.array([3.0, 1.0, -0.5, 0.2, 0.0])
xbar = graph.relative_positions(dm, x)
print("xbar:", xbar, "recovered x:", graph.positions_from_relative(chain, xbar))

# a funnel shrinking from 5 to 0.1 at rate 1
spec = performance.PerformanceSpec(rho0=5.0, rho_inf=0.1, l=1.0)
t = np.linspace(0, 5, 6)
print("rho(t):", np.round(performance.rho(spec, t), 4))
print("alpha(t):", np.round(performance.alpha(spec, t), 4))

# the region follows the sign of the initial error
ch = performance.EdgeChannel.for_initial(spec, xbar0=-2.0)
print("region:", (ch.region_lo, ch.region_hi))
for xh in (-0.9, -0.5, 0.0, 0.5, 0.9):
    eps = performance.transform(ch, xh)
    print(f"x_hat={xh:+.1f}  eps={eps:+.4f}  back={performance.inverse_transform(ch, eps):+.4f}")
