"""Discrete laws for per-slot arrivals and transmission windows.

Four kinds are supported, all on the nonnegative integers and all with a
finite fourth moment:

========== ================ ===========================================
kind       parameters       law
========== ================ ===========================================
bernoulli  ``p``            P(X=1) = p, P(X=0) = 1 - p
finite_pmf ``pmf``          P(X=k) = pmf[k], k = 0..K
poisson    ``mu``           P(X=k) = exp(-mu) mu^k / k!
geometric  ``p``            P(X=k) = (1 - p)^k p, k = 0, 1, 2, ...
========== ================ ===========================================

Sampling is by inversion of a tabulated CDF.  Unbounded laws are tabulated
until the cumulative mass reaches ``1 - TAIL_CUTOFF``; a uniform beyond the
table is clamped to the last tabulated value.
"""
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import InvalidPmf, ZeroProbOfOne
from .rng import RngState

PMF_TOL = 1e-12
TAIL_CUTOFF = 1e-12
KINDS = ("bernoulli", "finite_pmf", "poisson", "geometric")


@dataclass(frozen=True)
class DistributionSpec:
    """Kind plus parameters; ``params`` is a sorted tuple of (name, value)."""

    kind: str
    params: Tuple[Tuple[str, object], ...]

    @classmethod
    def bernoulli(cls, p):
        return cls("bernoulli", (("p", float(p)),))

    @classmethod
    def finite_pmf(cls, pmf):
        if isinstance(pmf, dict):
            if not pmf:
                raise InvalidPmf("empty pmf")
            if any(int(k) < 0 for k in pmf):
                raise InvalidPmf("pmf support must be nonnegative")
            dense = [0.0] * (max(int(k) for k in pmf) + 1)
            for k, v in pmf.items():
                dense[int(k)] += float(v)
            pmf = dense
        return cls("finite_pmf", (("pmf", tuple(float(x) for x in pmf)),))

    @classmethod
    def poisson(cls, mu):
        return cls("poisson", (("mu", float(mu)),))

    @classmethod
    def geometric(cls, p):
        return cls("geometric", (("p", float(p)),))

    def param(self, name):
        return dict(self.params)[name]

    def to_dict(self):
        out = {"kind": self.kind}
        for k, v in self.params:
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


@dataclass(frozen=True)
class DistributionMoments:
    mean: float
    fourth_central: float
    prob_eq_one: float
    prob_geq_one: float


@dataclass(frozen=True)
class Distribution:
    """A validated, sampleable law.

    ``pmf`` is the (possibly tail-truncated) probability table over
    ``0..len(pmf)-1`` and ``cdf`` its running sum.  ``truncated_mass`` is the
    tail mass omitted from the table (zero for bounded kinds).
    """

    spec: DistributionSpec
    pmf: np.ndarray = field(compare=False, repr=False)
    cdf: np.ndarray = field(compare=False, repr=False)
    truncated_mass: float = field(compare=False, default=0.0)

    @property
    def kind(self):
        return self.spec.kind

    @property
    def bounded(self):
        return self.kind in ("bernoulli", "finite_pmf")

    @property
    def has_mass_at_one(self):
        """False is the ZeroProbOfOne flag: the law cannot keep the chain irreducible."""
        return self.prob_eq_one > 0.0

    @property
    def prob_eq_one(self):
        return float(self.pmf[1]) if len(self.pmf) > 1 else 0.0

    @property
    def prob_zero(self):
        return float(self.pmf[0])

    @property
    def max_value(self):
        """Largest value the sampler can return."""
        return len(self.pmf) - 1

    @property
    def is_binary(self):
        """Support contained in {0, 1} (the single-packet window case)."""
        return self.bounded and not np.any(self.pmf[2:] > 0.0)

    def ppf(self, u):
        """Inverse-CDF map of uniforms in [0, 1) to values (vectorized)."""
        idx = np.searchsorted(self.cdf, u, side="right")
        return np.minimum(idx, len(self.cdf) - 1)

    def to_dict(self):
        return self.spec.to_dict()


def _check_probability(name, x, lo_open=False):
    if not (math.isfinite(x) and (0.0 < x if lo_open else 0.0 <= x) and x <= 1.0):
        bound = "(0, 1]" if lo_open else "[0, 1]"
        raise InvalidPmf(f"{name} must lie in {bound}, got {x!r}")


def _tabulate_unbounded(logpmf):
    """Enumerate a pmf until the cumulative reaches 1 - TAIL_CUTOFF."""
    probs = []
    total = 0.0
    k = 0
    while total < 1.0 - TAIL_CUTOFF:
        pk = math.exp(logpmf(k))
        probs.append(pk)
        total += pk
        k += 1
        if k > 10_000_000:
            raise InvalidPmf("tail enumeration did not converge")
    pmf = np.array(probs)
    return pmf, max(0.0, 1.0 - float(pmf.sum()))


def make_distribution(spec):
    """Validate ``spec`` and build a :class:`Distribution`.

    Raises :class:`InvalidPmf` for malformed parameters.  A law with no mass
    at 1 is still returned; see :attr:`Distribution.has_mass_at_one`.
    """
    if not isinstance(spec, DistributionSpec):
        raise TypeError("expected a DistributionSpec")
    kind = spec.kind
    truncated = 0.0
    if kind == "bernoulli":
        p = spec.param("p")
        _check_probability("bernoulli p", p)
        pmf = np.array([1.0 - p, p])
    elif kind == "finite_pmf":
        pmf = np.asarray(spec.param("pmf"), dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise InvalidPmf("pmf must be a nonempty vector")
        if not np.all(np.isfinite(pmf)) or np.any(pmf < 0.0):
            raise InvalidPmf("pmf entries must be finite and nonnegative")
        if abs(pmf.sum() - 1.0) > PMF_TOL:
            raise InvalidPmf(f"pmf sums to {pmf.sum()!r}, not 1")
    elif kind == "poisson":
        mu = spec.param("mu")
        if not (math.isfinite(mu) and mu > 0.0):
            raise InvalidPmf(f"poisson mu must be positive, got {mu!r}")
        pmf, truncated = _tabulate_unbounded(
            lambda k: -mu + k * math.log(mu) - math.lgamma(k + 1))
    elif kind == "geometric":
        s = spec.param("p")
        _check_probability("geometric p", s, lo_open=True)
        if s == 1.0:
            pmf = np.array([1.0])
        else:
            pmf, truncated = _tabulate_unbounded(lambda k: k * math.log1p(-s) + math.log(s))
    else:
        raise InvalidPmf(f"unknown distribution kind {kind!r}")
    cdf = np.cumsum(pmf)
    if kind in ("bernoulli", "finite_pmf"):
        cdf[-1] = 1.0
    pmf.setflags(write=False)
    cdf.setflags(write=False)
    return Distribution(spec, pmf, cdf, truncated)


def bernoulli(p):
    return make_distribution(DistributionSpec.bernoulli(p))


def finite_pmf(pmf):
    return make_distribution(DistributionSpec.finite_pmf(pmf))


def poisson(mu):
    return make_distribution(DistributionSpec.poisson(mu))


def geometric(p):
    return make_distribution(DistributionSpec.geometric(p))


def dist_moments(d):
    """Closed-form moments.

    Poisson(mu): mean mu, fourth central moment mu (1 + 3 mu).
    Geometric(s) counting failures, q = 1 - s: mean q / s and fourth central
    moment q (9 q + s^2) / s^4.
    """
    kind = d.kind
    if kind == "poisson":
        mu = d.spec.param("mu")
        mean, m4 = mu, mu * (1.0 + 3.0 * mu)
        p0, p1 = math.exp(-mu), mu * math.exp(-mu)
    elif kind == "geometric":
        s = d.spec.param("p")
        q = 1.0 - s
        mean, m4 = q / s, q * (9.0 * q + s * s) / s ** 4
        p0, p1 = s, q * s
    else:
        pmf = d.pmf
        k = np.arange(len(pmf), dtype=float)
        mean = float(pmf @ k)
        m4 = float(pmf @ (k - mean) ** 4)
        p0 = float(pmf[0])
        p1 = float(pmf[1]) if len(pmf) > 1 else 0.0
    return DistributionMoments(mean=mean, fourth_central=m4, prob_eq_one=p1,
                               prob_geq_one=1.0 - p0)


def dist_sample(d, rng):
    """Draw one value; returns ``(value, advanced_rng)``."""
    if not isinstance(rng, RngState):
        raise TypeError("rng must be an RngState")
    value = int(d.ppf(rng.uniform()))
    return value, rng.advance()


def require_mass_at_one(d, user=None, role="arrival"):
    """Raise ZeroProbOfOne unless P(X = 1) > 0."""
    if not d.has_mass_at_one:
        where = f" (user {user} {role})" if user is not None else ""
        raise ZeroProbOfOne(
            f"law {d.spec.to_dict()} has P(X = 1) = 0{where}; the queue chain "
            "would not be irreducible", user=user, role=role)
