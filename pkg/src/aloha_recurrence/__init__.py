"""Simulation and recurrence analysis of finite-user slotted Aloha queues."""
from .chain import (NetworkConfig, QueueState, SlotDraw, StepOutcome, attempt_probability,
                    bernoulli_network, simulate_trajectory, step, step_batch)
from .dists import (Distribution, DistributionMoments, DistributionSpec, bernoulli,
                    dist_moments, dist_sample, finite_pmf, geometric, make_distribution,
                    poisson)
from .errors import *  # noqa: F401,F403
from .oracle import build_truncated_chain, exact_return_time, saturated_drift
from .recurrence import (escape_probability, lyapunov_trace, return_time_stats,
                         sample_return_time, sample_return_times)
from .region import (Verdict, WitnessOptions, c1_membership, c2_membership, classify,
                     find_c1_witness, load_sum, offered_rates)
from .rng import RngState, replication_seed

__version__ = "0.1.0"
