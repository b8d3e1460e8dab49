import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aloha_recurrence.chain import NetworkConfig, bernoulli_network, slot_draw
from aloha_recurrence.dists import bernoulli, finite_pmf
from aloha_recurrence.errors import DomainError, EmptyInput, InitIsOrigin, NotSinglePacket
from aloha_recurrence.oracle import saturated_drift
from aloha_recurrence.recurrence import (ReturnTimeOutcome, default_escape_init,
                                         empirical_drift, escape_probability, lyapunov_trace,
                                         return_time_stats, sample_return_time,
                                         sample_return_times)
from aloha_recurrence.rng import replication_seed

RECURRENT_2 = bernoulli_network([0.1, 0.1], [0.5, 0.5])
TRANSIENT_2 = bernoulli_network([0.6, 0.6], [0.5, 0.5])
SINGLE = bernoulli_network([0.3], [0.7])


def test_return_at_first_slot_when_no_arrivals():
    seed = next(s for s in range(1000) if slot_draw(RECURRENT_2, s, 1).arrivals == (0, 0))
    assert sample_return_time(RECURRENT_2, 100, seed) == ReturnTimeOutcome(1)
    seed = next(s for s in range(1000) if slot_draw(RECURRENT_2, s, 1).arrivals != (0, 0))
    assert sample_return_time(RECURRENT_2, 100, seed).value > 1


def test_single_user_mean_return_time():
    # birth-death: pi_0 = 4/7, so E[T] = 7/4
    outs = sample_return_times(SINGLE, 20_000, 10_000, seed=5)
    st_ = return_time_stats(outs)
    assert st_.n_censored == 0
    assert abs(st_.mean - 1.75) < 4 * st_.std_error


def test_transient_mostly_censored():
    outs = sample_return_times(TRANSIENT_2, 200, 10_000, seed=1)
    frac = sum(o.censored for o in outs) / len(outs)
    # P(T = 1) = 0.4 ** 2 caps the censored fraction at 0.84
    assert 0.7 <= frac <= 0.84


def test_batch_matches_single_runs():
    outs = sample_return_times(RECURRENT_2, 50, 500, seed=33)
    for r in range(50):
        assert sample_return_time(RECURRENT_2, 500, replication_seed(33, r)) == outs[r]


def test_sample_return_time_reproducible():
    a = sample_return_time(RECURRENT_2, 1000, 77)
    assert a == sample_return_time(RECURRENT_2, 1000, 77)


def test_stats_examples():
    s = return_time_stats([1, 1, 3])
    assert s.mean == pytest.approx(5 / 3) and s.n_censored == 0
    s = return_time_stats([ReturnTimeOutcome(2), ReturnTimeOutcome.censored_at(100)])
    assert s.mean is None and s.std_error is None
    assert s.mean_lower_bound == 51
    with pytest.raises(EmptyInput):
        return_time_stats([])


def test_stats_tail():
    s = return_time_stats([1, 2, 2, 5, ReturnTimeOutcome.censored_at(10)], tail_k=[1, 2, 3, 6, 11])
    assert s.tail == ((1, 1.0), (2, 0.8), (3, 0.4), (6, 0.2), (11, 0.2))


def test_outcome_validation():
    with pytest.raises(DomainError):
        ReturnTimeOutcome(0)
    with pytest.raises(DomainError):
        ReturnTimeOutcome(None, True, None)


outcome = st.one_of(st.integers(1, 50).map(ReturnTimeOutcome),
                    st.integers(1, 50).map(ReturnTimeOutcome.censored_at))


@settings(max_examples=100, deadline=None)
@given(st.lists(outcome, min_size=1, max_size=30))
def test_tail_nonincreasing(outs):
    s = return_time_stats(outs, tail_k=range(1, 60))
    probs = [p for _, p in s.tail]
    assert all(a >= b for a, b in zip(probs, probs[1:]))
    if s.mean is not None:
        assert s.mean_lower_bound <= s.mean


def test_lyapunov_first_value():
    tr = lyapunov_trace(RECURRENT_2, 20_000, 5, seed=2)
    # from the origin Q_i(1) = A_i(1) and T >= 1 surely: y_1 = sum lambda_i / v_i
    assert abs(tr.y[0] - 0.8) < 4 * tr.y_se[0]
    assert tr.tail[0] == 1.0
    assert np.all(np.diff(tr.tail) <= 0)
    assert np.all(tr.y >= 0)
    assert np.all(tr.gap <= 4 * tr.gap_se)


def test_lyapunov_errors():
    with pytest.raises(DomainError):
        lyapunov_trace(RECURRENT_2, 10, 0)
    multi = NetworkConfig(((bernoulli(0.1), finite_pmf([0.5, 0.3, 0.2])),))
    with pytest.raises(NotSinglePacket):
        lyapunov_trace(multi, 10, 5)


def test_lyapunov_transient_has_no_gap():
    tr = lyapunov_trace(TRANSIENT_2, 50, 4, seed=1)
    assert tr.gap is None


def test_telescoped_bound():
    outs = sample_return_times(RECURRENT_2, 10_000, 10_000, seed=8)
    J = 40
    t = np.array([o.value for o in outs])
    per_run = np.minimum(t - 1, J)
    total = per_run.mean()
    se = per_run.std(ddof=1) / math.sqrt(t.size)
    eps = 1 - 0.8
    assert total <= 0.8 / eps + 4 * se


def test_escape_from_origin_rejected():
    with pytest.raises(InitIsOrigin):
        escape_probability(SINGLE, [0], 10, 10)


def test_escape_recurrent_single_user():
    est = escape_probability(SINGLE, [5], 100_000, 1000, seed=4)
    assert est.estimate < 0.01
    assert est.ci_low <= est.estimate <= est.ci_high


def test_default_escape_init():
    # delta = 3 * max C_i = 1.5 for p = 0.5 windows, K = 10
    assert default_escape_init(TRANSIENT_2).q == (15, 15)
    cfg = NetworkConfig(((bernoulli(0.2), finite_pmf([0.5, 0.3, 0.2])),
                         (bernoulli(0.2), bernoulli(0.3))))
    assert default_escape_init(cfg, K=4).q == (9, 9)


def test_escape_transient_default_init():
    est = escape_probability(TRANSIENT_2, None, 5000, 300, seed=6)
    assert est.init == (15, 15)
    assert est.estimate > 0.9


def test_saturated_drift_matches_simulation():
    d = empirical_drift(TRANSIENT_2, [200, 200], 2000, replications=20, seed=3)
    expected = saturated_drift(TRANSIENT_2)
    assert np.all(np.abs(d.mean - expected) < 4 * d.std_error)


def test_multipacket_saturated_drift():
    cfg = NetworkConfig(((bernoulli(0.9), finite_pmf([0.4, 0.3, 0.3])),
                         (bernoulli(0.9), finite_pmf([0.6, 0.2, 0.2]))))
    d = empirical_drift(cfg, [100, 100], 3000, replications=20, seed=9)
    assert np.all(np.abs(d.mean - saturated_drift(cfg)) < 4 * d.std_error)
