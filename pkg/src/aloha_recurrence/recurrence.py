"""Monte Carlo views of recurrence and transience.

All experiments start replication ``r`` on the stream
``replication_seed(seed, r)`` and advance every live replication one slot at
a time in a single vectorized batch.  Because each draw is a pure function of
(stream, slot, user), a replication gives the same path whether it runs alone
or inside any batch.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .chain import QueueState, first_origin_hit, sample_draws, step_batch
from .errors import DomainError, EmptyInput, InitIsOrigin, NotSinglePacket
from .region import load_sum, offered_rates
from .rng import replication_seed

DEFAULT_RETURN_HORIZON = 1_000_000
DEFAULT_ESCAPE_HORIZON = 100_000
DEFAULT_K = 10


@dataclass(frozen=True)
class ReturnTimeOutcome:
    """First return slot ``value`` or, if ``censored``, no return by ``horizon``."""

    value: Optional[int]
    censored: bool = False
    horizon: Optional[int] = None

    def __post_init__(self):
        if self.censored:
            if self.horizon is None or self.horizon < 1:
                raise DomainError("a censored outcome needs its horizon")
        elif self.value is None or self.value < 1:
            raise DomainError("return times are >= 1")

    @classmethod
    def censored_at(cls, horizon):
        return cls(None, True, int(horizon))

    @property
    def lower_bound(self):
        return self.horizon if self.censored else self.value


def sample_return_time(config, horizon=DEFAULT_RETURN_HORIZON, seed=0):
    """Run from the origin until every queue is empty again (at some k >= 1)."""
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    t = first_origin_hit(config, QueueState.origin(config.m), horizon, seed)
    return ReturnTimeOutcome.censored_at(horizon) if t is None else ReturnTimeOutcome(t)


def _batch_first_hits(config, keys, init, horizon):
    """First slot at which each stream reaches the origin; -1 if never."""
    keys = np.asarray(keys, dtype=np.uint64)
    r = keys.size
    hits = np.full(r, -1, dtype=np.int64)
    live = np.arange(r)
    q = np.tile(np.asarray(init, dtype=np.int64), (r, 1))
    for n in range(1, horizon + 1):
        a, w = sample_draws(config, keys[live], n)
        q, _, _ = step_batch(q, a, w)
        done = ~q.any(axis=1)
        if done.any():
            hits[live[done]] = n
            live = live[~done]
            q = q[~done]
            if live.size == 0:
                break
    return hits


def sample_return_times(config, replications, horizon=DEFAULT_RETURN_HORIZON, seed=0):
    """Return-time outcomes for ``replications`` independent runs from the origin."""
    if replications < 1:
        raise DomainError("replications must be >= 1")
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    keys = replication_seed(seed, np.arange(replications))
    hits = _batch_first_hits(config, keys, [0] * config.m, horizon)
    return [ReturnTimeOutcome(int(t)) if t > 0 else ReturnTimeOutcome.censored_at(horizon)
            for t in hits]


@dataclass(frozen=True)
class ReturnTimeStats:
    n_total: int
    n_censored: int
    mean: Optional[float]
    mean_lower_bound: float
    std_error: Optional[float]
    tail: Tuple[Tuple[int, float], ...]

    def to_dict(self):
        return {
            "n_total": self.n_total,
            "n_censored": self.n_censored,
            "mean": self.mean,
            "mean_lower_bound": self.mean_lower_bound,
            "std_error": self.std_error,
            "tail": [[k, p] for k, p in self.tail],
        }


def return_time_stats(outcomes, tail_k=()):
    """Summarize censored return-time samples.

    The mean (and its standard error) is reported only when nothing is
    censored; otherwise only ``mean_lower_bound``, which counts a censored run
    at its horizon.  ``tail`` gives P(T >= k) with censored runs counted as
    exceeding k, which is exact for k up to horizon + 1.  Plain integers are
    accepted as uncensored outcomes.
    """
    outcomes = [o if isinstance(o, ReturnTimeOutcome) else ReturnTimeOutcome(int(o))
                for o in outcomes]
    if not outcomes:
        raise EmptyInput("no return-time outcomes")
    n = len(outcomes)
    censored = np.array([o.censored for o in outcomes])
    lower = np.array([o.lower_bound for o in outcomes], dtype=float)
    n_cens = int(censored.sum())
    lb = float(lower.mean())
    mean = se = None
    if n_cens == 0:
        mean = lb
        se = float(lower.std(ddof=1) / math.sqrt(n)) if n > 1 else None
    tail = []
    for k in sorted(set(int(k) for k in tail_k)):
        exceed = np.sum(censored | (lower >= k))
        tail.append((k, float(exceed / n)))
    return ReturnTimeStats(n, n_cens, mean, lb, se, tuple(tail))


@dataclass(frozen=True)
class LyapunovTrace:
    """Per-slot Monte Carlo estimates for n = 1..n_max.

    ``y[n-1]`` estimates ``sum_i E[Q_i(n) 1(T >= n)] / v_i`` and ``tail[n-1]``
    estimates P(T >= n).  When the load sum is below one, ``gap[n-1]``
    estimates ``y_{n+1} - y_n + eps P(T >= n+1)`` with ``eps = 1 - load_sum``
    for n = 1..n_max-1, with paired standard errors in ``gap_se``.
    """

    n_max: int
    replications: int
    v: np.ndarray
    load_sum: float
    y: np.ndarray
    y_se: np.ndarray
    y_user: np.ndarray
    tail: np.ndarray
    tail_se: np.ndarray
    gap: Optional[np.ndarray]
    gap_se: Optional[np.ndarray]

    def to_dict(self):
        def lst(x):
            return None if x is None else [float(t) for t in x]
        return {
            "n_max": self.n_max,
            "replications": self.replications,
            "v": lst(self.v),
            "load_sum": self.load_sum,
            "y": lst(self.y),
            "y_se": lst(self.y_se),
            "tail": lst(self.tail),
            "tail_se": lst(self.tail_se),
            "gap": lst(self.gap),
            "gap_se": lst(self.gap_se),
        }


def _se(s1, s2, n):
    mean = s1 / n
    var = np.maximum(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return np.sqrt(var / n)


def lyapunov_trace(config, replications, n_max, seed=0):
    """Estimate the weighted queue functional used in the drift argument."""
    if not config.single_packet:
        raise NotSinglePacket("the drift functional needs windows supported on {0, 1}")
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    if replications < 1:
        raise DomainError("replications must be >= 1")
    m = config.m
    v = offered_rates(config.mean_windows, config.attempt_probs)
    ls = load_sum(config.lambdas, config.mean_windows, config.attempt_probs)
    eps = 1.0 - ls if ls < 1.0 else None
    keys = replication_seed(seed, np.arange(replications))
    q = np.zeros((replications, m), dtype=np.int64)
    alive = np.ones(replications, dtype=bool)

    y_s1 = np.zeros(n_max)
    y_s2 = np.zeros(n_max)
    yu = np.zeros((n_max, m))
    t_s1 = np.zeros(n_max)
    g_s1 = np.zeros(max(n_max - 1, 0))
    g_s2 = np.zeros(max(n_max - 1, 0))
    z_prev = None
    for n in range(1, n_max + 1):
        a, w = sample_draws(config, keys, n)
        q, _, _ = step_batch(q, a, w)
        # alive == 1(T >= n): no return in slots 1..n-1
        ind = alive.astype(float)
        weighted = q * ind[:, None]
        z = (weighted / v).sum(axis=1)
        y_s1[n - 1] = z.sum()
        y_s2[n - 1] = (z * z).sum()
        yu[n - 1] = weighted.mean(axis=0)
        t_s1[n - 1] = ind.sum()
        if z_prev is not None and eps is not None:
            d = z - z_prev + eps * ind
            g_s1[n - 2] = d.sum()
            g_s2[n - 2] = (d * d).sum()
        z_prev = z
        alive &= q.any(axis=1)

    r = replications
    tail = t_s1 / r
    gap = gap_se = None
    if eps is not None:
        gap = g_s1 / r
        gap_se = _se(g_s1, g_s2, r)
    return LyapunovTrace(
        n_max=n_max, replications=r, v=v, load_sum=ls,
        y=y_s1 / r, y_se=_se(y_s1, y_s2, r), y_user=yu,
        tail=tail, tail_se=np.sqrt(tail * (1.0 - tail) / r),
        gap=gap, gap_se=gap_se)


def default_escape_init(config, K=DEFAULT_K):
    """Symmetric start ``ceil(delta K)`` per queue, ``delta = 3 max_i C_i``."""
    delta = 3.0 * float(np.max(config.mean_windows))
    level = max(1, math.ceil(delta * K))
    return QueueState((level,) * config.m)


@dataclass(frozen=True)
class EscapeEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    n_escaped: int
    replications: int
    horizon: int
    init: Tuple[int, ...]
    confidence: float = 0.95

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "ci": [self.ci_low, self.ci_high],
            "confidence": self.confidence,
            "n_escaped": self.n_escaped,
            "replications": self.replications,
            "horizon": self.horizon,
            "init": list(self.init),
        }


def clopper_pearson(k, n, confidence=0.95):
    alpha = 1.0 - confidence
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def escape_probability(config, init=None, horizon=DEFAULT_ESCAPE_HORIZON,
                       replications=1000, seed=0, K=DEFAULT_K, confidence=0.95):
    """Fraction of runs from ``init`` that avoid the all-empty state for ``horizon`` slots.

    ``init`` defaults to :func:`default_escape_init`.  The interval is
    Clopper-Pearson at level ``confidence``.
    """
    init = default_escape_init(config, K) if init is None else init
    init = init if isinstance(init, QueueState) else QueueState(tuple(init))
    if len(init) != config.m:
        raise DomainError(f"init has {len(init)} entries for {config.m} users")
    if init.is_origin:
        raise InitIsOrigin("escape experiments must start away from the origin")
    if horizon < 1 or replications < 1:
        raise DomainError("horizon and replications must be >= 1")
    keys = replication_seed(seed, np.arange(replications))
    hits = _batch_first_hits(config, keys, init.q, horizon)
    k = int(np.sum(hits < 0))
    lo, hi = clopper_pearson(k, replications, confidence)
    return EscapeEstimate(k / replications, lo, hi, k, replications, horizon, init.q, confidence)


@dataclass(frozen=True)
class DriftEstimate:
    mean: np.ndarray
    std_error: np.ndarray
    n_slots: int


def empirical_drift(config, init, horizon, replications=1, seed=0):
    """Mean one-slot increment of each queue over saturated slots.

    A slot is saturated when, before it, every queue holds at least as many
    packets as its window can remove, so service is never capped by the
    queue length.
    """
    init = init if isinstance(init, QueueState) else QueueState(tuple(init))
    cap = np.array([max(1, w.max_value) for w in config.windows])
    keys = replication_seed(seed, np.arange(replications))
    q = np.tile(np.asarray(init.q, dtype=np.int64), (replications, 1))
    s1 = np.zeros(config.m)
    s2 = np.zeros(config.m)
    count = 0
    for n in range(1, horizon + 1):
        a, w = sample_draws(config, keys, n)
        nxt, _, _ = step_batch(q, a, w)
        sat = np.all(q >= cap, axis=1)
        d = (nxt - q)[sat]
        s1 += d.sum(axis=0)
        s2 += (d * d).sum(axis=0)
        count += int(sat.sum())
        q = nxt
    if count == 0:
        raise DomainError("no saturated slots observed")
    return DriftEstimate(s1 / count, _se(s1, s2, count), count)
