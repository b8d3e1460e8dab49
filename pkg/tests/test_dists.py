import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aloha_recurrence.dists import (DistributionSpec, bernoulli, dist_moments, dist_sample,
                                    finite_pmf, geometric, make_distribution, poisson)
from aloha_recurrence.errors import InvalidPmf
from aloha_recurrence.rng import RngState, slot_uniforms


def pmf_sum_moments(logpmf, kmax=2000):
    """Brute-force moments by summing the pmf until the tail is negligible."""
    k = np.arange(kmax)
    p = np.exp([logpmf(int(x)) for x in k])
    mean = float(p @ k)
    return mean, float(p @ (k - mean) ** 4), float(p[0]), float(p[1])


def test_bernoulli_half():
    d = bernoulli(0.5)
    mo = dist_moments(d)
    assert d.has_mass_at_one
    assert mo.prob_eq_one == 0.5
    assert mo.mean == 0.5
    assert mo.fourth_central == pytest.approx(0.0625, abs=1e-15)
    assert mo.prob_geq_one == 0.5


def test_pmf_without_mass_at_one_is_flagged():
    d = finite_pmf({0: 0.5, 2: 0.5})
    assert not d.has_mass_at_one
    assert dist_moments(d).prob_eq_one == 0.0


def test_pmf_summing_above_one_rejected():
    with pytest.raises(InvalidPmf):
        finite_pmf({0: 0.6, 1: 0.5})


@pytest.mark.parametrize("spec", [
    DistributionSpec.bernoulli(1.5),
    DistributionSpec.bernoulli(-0.1),
    DistributionSpec.poisson(0.0),
    DistributionSpec.geometric(0.0),
    DistributionSpec.finite_pmf([0.5, -0.1, 0.6]),
    DistributionSpec("uniform", (("a", 1.0),)),
])
def test_invalid_specs(spec):
    with pytest.raises(InvalidPmf):
        make_distribution(spec)


def test_pmf_tolerance_is_1e12():
    finite_pmf([0.5, 0.5 + 5e-13])
    with pytest.raises(InvalidPmf):
        finite_pmf([0.5, 0.5 + 5e-12])


def test_poisson_one_prob_geq_one():
    assert dist_moments(poisson(1.0)).prob_geq_one == pytest.approx(1 - math.exp(-1), abs=1e-15)


def test_poisson_two_fourth_central_matches_summation():
    mu = 2.0
    mean, m4, p0, p1 = pmf_sum_moments(lambda k: -mu + k * math.log(mu) - math.lgamma(k + 1), 200)
    mo = dist_moments(poisson(mu))
    assert m4 == pytest.approx(14.0, rel=1e-12)
    assert mo.fourth_central == pytest.approx(m4, rel=1e-12)
    assert mo.mean == pytest.approx(mean, rel=1e-12)


@pytest.mark.parametrize("s", [0.2, 0.4, 0.9])
def test_geometric_moments_match_summation(s):
    mean, m4, p0, p1 = pmf_sum_moments(lambda k: k * math.log1p(-s) + math.log(s))
    mo = dist_moments(geometric(s))
    assert mo.mean == pytest.approx(mean, rel=1e-10)
    assert mo.fourth_central == pytest.approx(m4, rel=1e-9)
    assert mo.prob_geq_one == pytest.approx(1 - p0, rel=1e-12)
    assert mo.prob_eq_one == pytest.approx(p1, rel=1e-12)


def test_finite_pmf_moments_direct():
    d = finite_pmf([0.2, 0.5, 0.3])
    mo = dist_moments(d)
    assert mo.mean == pytest.approx(1.1)
    assert mo.fourth_central == pytest.approx(0.2 * 1.1 ** 4 + 0.5 * 0.1 ** 4 + 0.3 * 0.9 ** 4)
    assert mo.prob_geq_one == pytest.approx(0.8)


def test_poisson_table_reaches_cutoff():
    d = poisson(3.0)
    assert d.cdf[-1] >= 1 - 1e-12
    assert d.truncated_mass <= 1e-12
    assert d.ppf(np.array([0.999999999999999]))[0] == d.max_value


def test_point_masses():
    rng = RngState(12345)
    for _ in range(50):
        v, rng = dist_sample(bernoulli(1.0), rng)
        assert v == 1
        w, rng = dist_sample(finite_pmf({3: 1.0}), rng)
        assert w == 3


def test_dist_sample_is_pure():
    rng = RngState(99, 7)
    a, r1 = dist_sample(poisson(1.3), rng)
    b, r2 = dist_sample(poisson(1.3), rng)
    assert a == b and r1 == r2 == RngState(99, 8)


def test_bernoulli_million_mean():
    u = slot_uniforms(np.uint64(2024), np.arange(1, 500_001), 1).reshape(-1)
    x = bernoulli(0.5).ppf(u)
    assert x.size == 1_000_000
    assert abs(x.mean() - 0.5) < 0.002


LAWS = [bernoulli(0.3), finite_pmf([0.1, 0.6, 0.0, 0.3]), poisson(1.7), geometric(0.35)]


@pytest.mark.parametrize("d", LAWS, ids=lambda d: d.kind)
def test_empirical_moments_within_4se(d):
    u = slot_uniforms(np.uint64(77), np.arange(1, 50_001), 1).reshape(-1)
    x = d.ppf(u)
    mo = dist_moments(d)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - mo.mean) < 4 * se
    f0 = np.mean(x == 0)
    assert abs((1 - f0) - mo.prob_geq_one) < 4 * math.sqrt(f0 * (1 - f0) / x.size)
    assert math.isfinite(mo.fourth_central) and mo.fourth_central >= 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda w: sum(w) > 0))
def test_moment_invariants_random_pmf(weights):
    pmf = np.array(weights) / sum(weights)
    pmf[-1] = 1.0 - pmf[:-1].sum()
    if pmf[-1] < 0:
        return
    mo = dist_moments(finite_pmf(pmf.tolist()))
    assert mo.mean >= 0 and mo.fourth_central >= 0
    assert mo.prob_eq_one <= mo.prob_geq_one + 1e-15 <= 1 + 1e-15


def test_spec_round_trip():
    for d in LAWS:
        assert make_distribution(d.spec) == d
