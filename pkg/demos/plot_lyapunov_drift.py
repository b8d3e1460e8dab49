"""
The weighted queue functional
=============================

Track ``y_n = sum_i E[Q_i(n) 1(T >= n)] / v_i`` and the drift gap, which
should stay non-positive up to sampling noise when the load sum is below one.
"""
# %%
import numpy as np

from aloha_recurrence import bernoulli_network, lyapunov_trace

cfg = bernoulli_network([0.1, 0.1], [0.5, 0.5])
tr = lyapunov_trace(cfg, replications=10_000, n_max=30, seed=5)
print("load sum:", tr.load_sum)
print("y_1 = %.4f +- %.4f" % (tr.y[0], tr.y_se[0]))

# %%
z = tr.gap / np.where(tr.gap_se > 0, tr.gap_se, np.inf)
print("largest standardized gap:", z.max())
