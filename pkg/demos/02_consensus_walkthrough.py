# %% [markdown]
# Two-bit quantized averaging
#
# Each round a node sends its balancing bit and one dithered bit of its
# estimate. The estimates keep their sum fixed even while the weights are
# still unbalanced, so whatever they agree on is the true average.

# %%
import numpy as np

import quantbal as qb

rng = np.random.default_rng(0)
g = qb.generate_ring_plus_random(6, 0.5, rng)
y0 = rng.random(6)
state = qb.init_consensus(g, y0, qb.QuantizerConfig(0.0, 1.0), qb.AlphaSchedule(1.0, 1.0), seed=42)
print("initial values:", np.round(y0, 4).tolist(), " average:", round(state.y_bar0, 6))
print("first round messages:", state.wire_messages())

# %% [markdown]
# The dither is unbiased: for a frozen estimate, the quantized bit is
# ``q_max`` with probability equal to the clipped estimate's position in
# the range.

# %%
x = qb.dithered_quantize(np.full(100_000, 0.25), qb.QuantizerConfig(), np.random.default_rng(1))
print("P(x = 1) at 0.25:", x.mean())

# %% [markdown]
# Run 20 000 rounds and watch the mean squared error fall while the mean
# of the estimates stays put.

# %%
log = []
final = qb.run_consensus(state, 20_000, log.append, observe_every=2000)
for rec in log:
    print(f"k={rec.k:6d}  mse={rec.mse:.3e}  mean(y)={np.mean(rec.y):.12f}")
print("largest drift of the mean:", final.mean_drift)
