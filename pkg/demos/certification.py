"""
Certifying a funnel decay rate
==============================

The general block-matrix test, and the special bounds for stars and chains.
"""

from leadppc import graph
from leadppc.certify import certify, chain_bound, chain_k_factor, max_gamma

# stars with the centre as sole leader admit rates up to 1
for n in (3, 6, 11):
    s = max_gamma(graph.derive_matrices(graph.make_star(n, {n})))
    print(f"star n={n}: status={s.status.value} gamma_bar={s.gamma_bar:.6f}")

# a two-edge tree whose feasible set is a bounded interval
t = graph.build_topology(3, [(2, 1), (2, 3)], {2, 3})
s = max_gamma(graph.derive_matrices(t))
print("two-edge tree: gamma_bar =", round(s.gamma_bar, 6), "(3 + sqrt 6 = 5.449490)")

# chains: the general test is infeasible, the chain bound decides
for n_f in range(1, 6):
    print(f"chain n_f={n_f}: bound={chain_bound(n_f)}")

# k-factor of the zero-input follower block, equal to 1 only for 2 or 3 followers
for n_f in range(2, 9):
    a = chain_k_factor(n_f)
    print(f"n_f={n_f}: lambda_max={a.lambda_max:+.4f} k={a.k_factor:.6f} admissible_l={a.admissible_l}")

# routing through certify() for a concrete decay rate
for topo, l in [(graph.make_star(11, {11}), 1.0), (graph.make_chain(5, 2), 2.0), (graph.make_chain(8, 5), 0.5)]:
    rep = certify(topo, l)
    print(f"n={topo.n} l={l}: approved={rep.approved} via {rep.method.value} {rep.note}")
