"""Slot-by-slot dynamics of the multiuser Aloha queue chain.

In slot n+1 user i is *eligible* when its queue was nonempty at the end of
slot n and its window draw W_i(n+1) is at least one.  It succeeds when it is
the only eligible user, and then min(Q_i(n), W_i(n+1)) packets leave its
queue.  Arrivals A_i(n+1) join after service, so a packet can never be served
in the slot it arrives ("late arrivals").  A user with an empty queue neither
transmits nor blocks anyone, whatever its window draw.
"""
import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from .dists import Distribution, bernoulli, dist_moments, require_mass_at_one
from .errors import DimensionMismatch, DomainError
from .rng import slot_uniforms

FULL_STORAGE_LIMIT = 100_000
_CHUNK = 4096


def attempt_probability(window):
    """P(W >= 1)."""
    return dist_moments(window).prob_geq_one


@dataclass(frozen=True)
class NetworkConfig:
    """Per-user (arrival law, window law) pairs.

    Validation enforces M >= 1 and P(A_i = 1) > 0, P(W_i = 1) > 0 for every
    user, which keeps the queue chain irreducible.
    """

    users: Tuple[Tuple[Distribution, Distribution], ...]

    def __post_init__(self):
        users = tuple((a, w) for a, w in self.users)
        object.__setattr__(self, "users", users)
        if not users:
            raise DomainError("a network needs at least one user")
        for i, (a, w) in enumerate(users):
            if not isinstance(a, Distribution) or not isinstance(w, Distribution):
                raise TypeError("users must be (Distribution, Distribution) pairs")
            require_mass_at_one(a, user=i, role="arrival")
            require_mass_at_one(w, user=i, role="window")

    @property
    def m(self):
        return len(self.users)

    @property
    def arrivals(self):
        return [a for a, _ in self.users]

    @property
    def windows(self):
        return [w for _, w in self.users]

    @cached_property
    def lambdas(self):
        return np.array([dist_moments(a).mean for a in self.arrivals])

    @cached_property
    def mean_windows(self):
        return np.array([dist_moments(w).mean for w in self.windows])

    @cached_property
    def attempt_probs(self):
        return np.array([attempt_probability(w) for w in self.windows])

    @property
    def single_packet(self):
        return all(w.is_binary for w in self.windows)

    def to_dict(self):
        return {"users": [{"arrival": a.to_dict(), "window": w.to_dict()}
                          for a, w in self.users]}


def bernoulli_network(lambdas, ps):
    """Bernoulli arrivals with rates ``lambdas`` and Bernoulli windows ``ps``."""
    if len(lambdas) != len(ps):
        raise DimensionMismatch("lambdas and ps differ in length")
    return NetworkConfig(tuple((bernoulli(lam), bernoulli(p)) for lam, p in zip(lambdas, ps)))


@dataclass(frozen=True, slots=True)
class QueueState:
    q: Tuple[int, ...]

    def __post_init__(self):
        q = tuple(int(x) for x in self.q)
        if any(x < 0 for x in q):
            raise DomainError(f"queue lengths must be nonnegative, got {q}")
        object.__setattr__(self, "q", q)

    @classmethod
    def origin(cls, m):
        return cls((0,) * m)

    @property
    def is_origin(self):
        return not any(self.q)

    def __len__(self):
        return len(self.q)


@dataclass(frozen=True, slots=True)
class SlotDraw:
    arrivals: Tuple[int, ...]
    windows: Tuple[int, ...]

    def __post_init__(self):
        if len(self.arrivals) != len(self.windows):
            raise DimensionMismatch("arrivals and windows differ in length")


@dataclass(frozen=True, slots=True)
class StepOutcome:
    next: QueueState
    success: Tuple[bool, ...]
    served: Tuple[int, ...]


_NEW = object.__new__
_SET = object.__setattr__


def step(state, draw):
    """Apply one slot of the queue update to ``state``."""
    q = state.q if isinstance(state, QueueState) else tuple(state)
    a, w = draw.arrivals, draw.windows
    m = len(q)
    if len(a) != m or len(w) != m:
        raise DimensionMismatch(f"draw has {len(a)} users, state has {m}")
    winner = -1
    for i in range(m):
        if q[i] >= 1 and w[i] >= 1:
            if winner != -1:
                winner = -1
                break
            winner = i
    nxt = list(map(int.__add__, map(int, q), map(int, a)))
    success = [False] * m
    served = [0] * m
    if winner >= 0:
        s = min(q[winner], w[winner])
        success[winner] = True
        served[winner] = s
        nxt[winner] -= s
    if min(nxt) < 0:
        raise DomainError(f"queue lengths must be nonnegative, got {nxt}")
    nq = _NEW(QueueState)
    _SET(nq, "q", tuple(nxt))
    out = _NEW(StepOutcome)
    _SET(out, "next", nq)
    _SET(out, "success", tuple(success))
    _SET(out, "served", tuple(served))
    return out


def step_batch(q, arrivals, windows):
    """Vectorized :func:`step` over the leading axis of (R, M) integer arrays.

    Returns ``(next_q, success, served)`` with the same shapes.
    """
    q = np.asarray(q)
    if q.shape != np.shape(arrivals) or q.shape != np.shape(windows):
        raise DimensionMismatch("state, arrivals and windows shapes differ")
    eligible = (q >= 1) & (windows >= 1)
    success = eligible & (eligible.sum(axis=-1, keepdims=True) == 1)
    served = np.where(success, np.minimum(q, windows), 0)
    return q + arrivals - served, success, served


def sample_draws(config, keys, slots):
    """Arrival and window draws for stream ``keys`` at slot indices ``slots``.

    ``keys`` and ``slots`` broadcast; results have shape ``broadcast + (M,)``.
    Slot indices are 1-based: slot n+1 moves Q(n) to Q(n+1).
    """
    u = slot_uniforms(keys, slots, config.m)
    arrivals = np.empty(u.shape[:-1], dtype=np.int64)
    windows = np.empty(u.shape[:-1], dtype=np.int64)
    for i, (a, w) in enumerate(config.users):
        arrivals[..., i] = a.ppf(u[..., i, 0])
        windows[..., i] = w.ppf(u[..., i, 1])
    return arrivals, windows


def slot_draw(config, key, slot):
    """The :class:`SlotDraw` a trajectory with stream ``key`` uses at ``slot``."""
    a, w = sample_draws(config, np.uint64(key), slot)
    return SlotDraw(tuple(int(x) for x in a), tuple(int(x) for x in w))


@dataclass
class TrajectoryRecord:
    """Output of :func:`simulate_trajectory`.

    ``slots``, ``states``, ``success_user`` (1-based, 0 for none) and
    ``served`` hold recorded slots only; with ``stride > 1`` every
    ``stride``-th slot is kept.  The remaining fields aggregate over every
    slot of the run.
    """

    seed: int
    horizon: int
    init: Tuple[int, ...]
    stride: int
    slots: np.ndarray
    states: np.ndarray
    success_user: np.ndarray
    served: np.ndarray
    success_counts: np.ndarray
    served_counts: np.ndarray
    nonempty_counts: np.ndarray
    origin_visits: int
    final: Tuple[int, ...]
    first_origin_hit: Optional[int] = None

    @property
    def m(self):
        return len(self.init)

    def to_csv(self, fh=None):
        """Write the recorded slots as CSV; returns the text if ``fh`` is None."""
        own = fh is None
        if own:
            fh = io.StringIO()
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slot"] + [f"q_{i + 1}" for i in range(self.m)]
                        + ["success_user", "served"])
        for k in range(len(self.slots)):
            writer.writerow([int(self.slots[k])] + [int(x) for x in self.states[k]]
                            + [int(self.success_user[k]), int(self.served[k])])
        if own:
            return fh.getvalue()

    def summary(self):
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "init": list(self.init),
            "final": list(self.final),
            "stride": self.stride,
            "success_counts": [int(x) for x in self.success_counts],
            "served_counts": [int(x) for x in self.served_counts],
            "nonempty_counts": [int(x) for x in self.nonempty_counts],
            "origin_visits": self.origin_visits,
            "first_origin_hit": self.first_origin_hit,
        }


def _run(config, init, horizon, key, stride, stop_at_origin=False):
    m = config.m
    q = list(init)
    n_rec = horizon // stride
    slots = np.zeros(n_rec, dtype=np.int64)
    states = np.zeros((n_rec, m), dtype=np.int64)
    winners = np.zeros(n_rec, dtype=np.int64)
    served_rec = np.zeros(n_rec, dtype=np.int64)
    success_counts = [0] * m
    served_counts = [0] * m
    nonempty = [0] * m
    visits = 0
    first_hit = None
    rec = 0
    users = range(m)
    for start in range(1, horizon + 1, _CHUNK):
        stop = min(start + _CHUNK, horizon + 1)
        a_chunk, w_chunk = sample_draws(config, np.uint64(key), np.arange(start, stop))
        for n, arr, win in zip(range(start, stop), a_chunk.tolist(), w_chunk.tolist()):
            winner = -1
            n_eligible = 0
            for i in users:
                if q[i] >= 1 and win[i] >= 1:
                    n_eligible += 1
                    winner = i
            out = 0
            if n_eligible == 1:
                out = min(q[winner], win[winner])
                q[winner] -= out
                success_counts[winner] += 1
                served_counts[winner] += out
            else:
                winner = -1
            empty = True
            for i in users:
                q[i] += arr[i]
                if q[i]:
                    nonempty[i] += 1
                    empty = False
            if empty:
                visits += 1
                if first_hit is None:
                    first_hit = n
                    if stop_at_origin:
                        return first_hit
            if n % stride == 0 and rec < n_rec:
                slots[rec] = n
                states[rec] = q
                winners[rec] = winner + 1
                served_rec[rec] = out
                rec += 1
    if stop_at_origin:
        return None
    return TrajectoryRecord(
        seed=int(key), horizon=horizon, init=tuple(init), stride=stride,
        slots=slots, states=states, success_user=winners, served=served_rec,
        success_counts=np.array(success_counts), served_counts=np.array(served_counts),
        nonempty_counts=np.array(nonempty), origin_visits=visits, final=tuple(q),
        first_origin_hit=first_hit)


def simulate_trajectory(config, init=None, horizon=1000, seed=0, stride=None):
    """Run the chain for ``horizon`` slots from ``init`` (default: origin).

    Every slot is stored when ``horizon <= 10**5``; longer runs keep every
    ``ceil(horizon / 10**5)``-th slot unless ``stride`` is given.  The result
    is a pure function of (config, init, horizon, seed).
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    init = QueueState.origin(config.m) if init is None else init
    init = init if isinstance(init, QueueState) else QueueState(tuple(init))
    if len(init) != config.m:
        raise DimensionMismatch(f"init has {len(init)} entries for {config.m} users")
    if stride is None:
        stride = 1 if horizon <= FULL_STORAGE_LIMIT else math.ceil(horizon / FULL_STORAGE_LIMIT)
    if stride < 1:
        raise DomainError("stride must be >= 1")
    return _run(config, init.q, horizon, int(seed), int(stride))


def first_origin_hit(config, init, horizon, seed):
    """First slot k >= 1 at which every queue is empty, or None within ``horizon``."""
    init = init if isinstance(init, QueueState) else QueueState(tuple(init))
    return _run(config, init.q, horizon, int(seed), horizon + 1, stop_at_origin=True)
