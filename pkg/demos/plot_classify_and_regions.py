"""
Recurrent, transient or neither
===============================

Classify a few networks and search for attempt probabilities that place a
rate vector inside the inner region.
"""
# %%
from aloha_recurrence import bernoulli_network, classify, find_c1_witness

for lam in ([0.1, 0.1], [0.6, 0.6], [0.2, 0.3]):
    v = classify(bernoulli_network(lam, [0.5, 0.5]))
    print(lam, v.label, round(v.load_sum, 4), [round(x, 4) for x in v.margins])

# %%
# The symmetric inner boundary sits at 1/8 per user for two users.
for x in (0.12, 0.13):
    res = find_c1_witness([x, x])
    print(x, res.found, res.best_p, round(res.best_f, 6))
