"""
Return times: simulation against the exact chain
================================================

The truncated chain gives E[T] to solver precision when the box is large
enough; Monte Carlo should land within a few standard errors.
"""
# %%
from aloha_recurrence import (bernoulli_network, build_truncated_chain, exact_return_time,
                              return_time_stats, sample_return_times)

cfg = bernoulli_network([0.1, 0.1], [0.5, 0.5])
exact = exact_return_time(build_truncated_chain(cfg, 60))
print("exact E[T]:", exact.expected, "boundary occupancy:", exact.boundary_occupancy)

# %%
st = return_time_stats(sample_return_times(cfg, 10_000, 100_000, seed=3), tail_k=(2, 5, 10))
print("mc mean: %.4f +- %.4f" % (st.mean, st.std_error))
print("tail:", st.tail)

# %%
# A small box refuses to answer rather than return a biased number.
from aloha_recurrence import TruncationDominated

try:
    exact_return_time(build_truncated_chain(bernoulli_network([0.3, 0.3], [0.5, 0.5]), 10))
except TruncationDominated as exc:
    print("refused:", exc)
