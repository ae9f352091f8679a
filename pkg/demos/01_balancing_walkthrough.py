# %% [markdown]
# One-bit weight balancing, round by round
#
# Start with the smallest interesting digraph: three nodes, edges
# 0->1, 0->2, 1->2, 2->0. Node 0 sends on two edges but receives on one,
# so with unit weights it starts with balance -1 and node 2 with +1.

# %%
import numpy as np

import quantbal as qb

g = qb.Digraph.from_edges(3, [(0, 1), (0, 2), (1, 2), (2, 0)])
s = qb.init_balancer(g)
print("out-degrees:", g.out_degree.tolist())
print("balances:   ", s.balances().tolist())
print("signals:    ", qb.compute_signals(s).tolist())

# %% [markdown]
# Node 2 is the only node whose balance reaches ``d_out * gamma``. It fires,
# and its single out-neighbor (node 0) raises the weight on edge 2->0 by
# gamma. That one transfer balances the whole graph.

# %%
s1 = qb.step_balancer(s)
print(qb.format_weights_exact(s1))
print("balances after one round:", s1.balances().tolist())

# %% [markdown]
# The step size halves on windows of doubling length: 1, 1/2, 1/2, 1/4 x4, ...
# Internally every quantity is an integer over 2**scale_exp, so the
# threshold test is exact.

# %%
print([str(qb.gamma(k)) for k in range(8)])

# %% [markdown]
# A random six-node graph: directed ring plus extra edges with probability
# 0.5. The observer sees the exact total imbalance each round; the proof
# monitor replays the per-round decrement and potential checks and would
# raise on any violation.

# %%
g6 = qb.generate_ring_plus_random(6, 0.5, np.random.default_rng(3))
trace = []
monitor = qb.ProofMonitor(g6)
final, k = qb.run_balancer(qb.init_balancer(g6), max_iters=4000, observer=trace.append,
                           monitor=monitor)
for rec in trace[:: len(trace) // 12 or 1]:
    print(f"k={rec.k:5d}  gamma=2^-{rec.gamma_exp:<2d}  eps={rec.eps:.6f}  event={rec.decreasing_event}")
print(f"stopped at k={k}; potential checks {monitor.potential_checks}, max U {monitor.max_potential}")

# %% [markdown]
# k * eps(k) stays bounded: the convergence-rate certificate.

# %%
print("max k*eps over k>=16:", float(qb.rate_statistic(trace, 16)))
