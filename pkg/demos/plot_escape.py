"""
Escape from a loaded start
==========================

Above capacity the queues grow linearly and almost no run comes back to the
empty state.
"""
# %%
import numpy as np

from aloha_recurrence import bernoulli_network, escape_probability, simulate_trajectory
from aloha_recurrence.oracle import saturated_drift

cfg = bernoulli_network([0.6, 0.6], [0.5, 0.5])
print("saturated drift per user:", saturated_drift(cfg))

rec = simulate_trajectory(cfg, [30, 30], 10_000, seed=2)
slope = np.polyfit(rec.slots, rec.states.sum(axis=1), 1)[0]
print("growth of Q1 + Q2 per slot: %.3f" % slope)

# %%
est = escape_probability(cfg, [30, 30], horizon=10_000, replications=500, seed=2)
print(est.to_dict())
