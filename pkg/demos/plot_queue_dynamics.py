"""
Queue dynamics of a two-user network
====================================

Simulate a short trajectory and look at how often the queues empty out.
"""
# %%
# A light load: both users receive packets at rate 0.1 and attempt with
# probability 0.5.
import numpy as np

from aloha_recurrence import bernoulli_network, simulate_trajectory

cfg = bernoulli_network([0.1, 0.1], [0.5, 0.5])
rec = simulate_trajectory(cfg, horizon=5000, seed=1)
print(rec.summary())

# %%
# Fraction of slots in which the whole system is empty.
empty = ~rec.states.any(axis=1)
print("empty fraction:", empty.mean())

# %%
# The first rows of the CSV export.
print("\n".join(rec.to_csv().splitlines()[:6]))
