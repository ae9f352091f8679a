# %% [markdown]
# Density sweep over ring-plus-random graphs
#
# Aggregate curves for three extra-edge probabilities, the same protocol
# the command-line harness runs. Kept small so it finishes in about a
# minute; raise the counts for smoother curves.

# %%
import quantbal as qb

for p in (0.2, 0.5, 0.8):
    bal = qb.run_experiment(qb.ExperimentConfig(mode="balance", p=p, trials=1, graph_realizations=30,
                                                max_iters=5000, record_every=500)).series
    con = qb.run_experiment(qb.ExperimentConfig(mode="consensus", p=p, trials=3, graph_realizations=5,
                                                max_iters=5000, record_every=500)).series
    print(f"p={p}")
    for i in range(len(bal)):
        print(f"  k={int(bal.k[i]):5d}  mean eps={bal.mean[i]:.4f}  mean mse={con.mean[i]:.3e}")

# %% [markdown]
# The same runs from a shell, written as CSV:
#
#     quantbal balance --p 0.5 --graph-realizations 30 --trials 1 --max-iters 5000 --out eps.csv
#     quantbal consensus --p 0.5 --graph-realizations 5 --trials 3 --max-iters 5000 --out mse.csv
