"""Recurrence classification and inner/outer region bounds.

For attempt probabilities p and mean windows C, user i clears on average
``v_i = C_i * prod_{j != i} (1 - p_j)`` packets per slot while every queue is
backlogged.  A single-packet network is positive recurrent when the load sum
``sum_i lambda_i / v_i`` is below one, and any network with finite fourth
moments is transient when ``lambda_i > v_i`` for every user.

The inner region C1 is the union over p of the single-packet load-sum sets,
and the outer region C2 the union over p of the sets where at least one user
is below its saturated capacity.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .chain import bernoulli_network
from .errors import DimensionMismatch, DomainError, ZeroOfferedRate

RECURRENT = "Recurrent"
TRANSIENT = "Transient"
INDETERMINATE = "Indeterminate"

P_FLOOR = 1e-9
P_CEIL = 1.0 - 1e-9
EARLY_EXIT = 1.0 - 1e-12


def offered_rates(C, p):
    """``v_i = C_i * prod_{j != i} (1 - p_j)``; the empty product is 1."""
    C = np.asarray(C, dtype=float)
    p = np.asarray(p, dtype=float)
    if C.shape != p.shape or C.ndim != 1:
        raise DimensionMismatch(f"C has shape {C.shape}, p has shape {p.shape}")
    if np.any((p < 0.0) | (p > 1.0)):
        raise DomainError("attempt probabilities must lie in [0, 1]")
    q = 1.0 - p
    # Leave-one-out products without dividing by q (which may be zero).
    left = np.concatenate(([1.0], np.cumprod(q)[:-1]))
    right = np.concatenate((np.cumprod(q[::-1])[:-1][::-1], [1.0]))
    return C * left * right


def load_sum(lam, C, p):
    """``sum_i lambda_i / v_i``; raises ZeroOfferedRate when some v_i is zero."""
    lam = np.asarray(lam, dtype=float)
    v = offered_rates(C, p)
    if lam.shape != v.shape:
        raise DimensionMismatch(f"lambda has shape {lam.shape}, v has shape {v.shape}")
    if np.any(v <= 0.0):
        raise ZeroOfferedRate(f"offered rate is zero for users {np.flatnonzero(v <= 0).tolist()}")
    return float(np.sum(lam / v))


@dataclass(frozen=True)
class Verdict:
    label: str
    load_sum: float
    margins: Tuple[float, ...]
    notes: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        return {
            "label": self.label,
            "load_sum": self.load_sum if math.isfinite(self.load_sum) else None,
            "margins": list(self.margins),
            "notes": dict(self.notes),
        }


def classify(config):
    """Label ``config`` Recurrent, Transient or Indeterminate.

    Recurrent needs load sum < 1 and every window supported on {0, 1}; with
    multipacket windows the same load sum only yields Indeterminate.
    Transient needs ``lambda_i > v_i`` for every user.  All supported laws
    have finite fourth moments, so that hypothesis always holds.
    """
    lam = config.lambdas
    v = offered_rates(config.mean_windows, config.attempt_probs)
    try:
        ls = load_sum(lam, config.mean_windows, config.attempt_probs)
    except ZeroOfferedRate:
        ls = math.inf
    margins = tuple(float(x) for x in lam - v)
    binary = config.single_packet
    eq_low = ls < 1.0
    eq_up = all(x > 0.0 for x in margins)
    notes = {
        "window_binary": binary,
        "fourth_moments_finite": True,
        "eq_low": eq_low,
        "eq_up": eq_up,
        "offered_rates": [float(x) for x in v],
    }
    if eq_low and binary:
        label = RECURRENT
    elif eq_up:
        label = TRANSIENT
    else:
        label = INDETERMINATE
        if eq_low:
            notes["reason"] = "eq_low holds but window-binary hypothesis fails"
    return Verdict(label, ls, margins, notes)


def _check_open_unit(name, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DimensionMismatch(f"{name} must be a nonempty vector")
    if np.any(~np.isfinite(x) | (x <= 0.0) | (x >= 1.0)):
        raise DomainError(f"every entry of {name} must lie strictly in (0, 1)")
    return x


def single_packet_load(lam, p):
    """The load sum with ``C = p`` (Bernoulli windows)."""
    return load_sum(lam, p, p)


def c1_membership(lam, p):
    lam = _check_open_unit("lambda", lam)
    p = _check_open_unit("p", p)
    if lam.shape != p.shape:
        raise DimensionMismatch("lambda and p differ in length")
    return single_packet_load(lam, p) < 1.0


def c2_membership(lam, p):
    lam = _check_open_unit("lambda", lam)
    p = _check_open_unit("p", p)
    if lam.shape != p.shape:
        raise DimensionMismatch("lambda and p differ in length")
    return bool(np.any(lam < offered_rates(p, p)))


@dataclass(frozen=True)
class WitnessOptions:
    grid_points: int = 25
    n_starts: int = 64
    tolerance: float = 1e-9
    max_iter: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.grid_points < 1 or self.n_starts < 1 or self.max_iter < 1:
            raise DomainError("grid_points, n_starts and max_iter must be positive")
        if not self.tolerance > 0.0:
            raise DomainError("tolerance must be positive")


@dataclass(frozen=True)
class WitnessResult:
    found: bool
    p: Optional[Tuple[float, ...]]
    best_p: Tuple[float, ...]
    best_f: float
    init_f: float
    iterations: int

    def to_dict(self):
        return {
            "found": self.found,
            "p": None if self.p is None else list(self.p),
            "best_p": list(self.best_p),
            "best_f": self.best_f,
            "init_f": self.init_f,
            "iterations": self.iterations,
        }


def _f_batch(lam, P):
    """Single-packet load sum for each row of ``P``."""
    Q = 1.0 - P
    logq = np.log(Q)
    loo = np.exp(logq.sum(axis=1, keepdims=True) - logq)
    return np.sum(lam / (P * loo), axis=1)


def _logit(p):
    return math.log(p) - math.log1p(-p)


def _expit(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def _descend(lam, x, opts):
    """Coordinate descent in logit coordinates.

    Along coordinate i the objective is ``a / p_i + b / (1 - p_i)`` with a, b
    fixed by the other coordinates, so each coordinate step is solved exactly
    at ``p_i = sqrt(a) / (sqrt(a) + sqrt(b))`` (then clamped).
    """
    m = len(lam)
    x = list(x)
    p = np.array([_expit(t) for t in x])
    f = float(_f_batch(lam, p[None, :])[0])
    lo, hi = _logit(P_FLOOR), _logit(P_CEIL)
    it = 0
    while it < opts.max_iter:
        it += 1
        f_prev = f
        for i in range(m):
            q = 1.0 - p
            others = np.delete(np.arange(m), i)
            a = lam[i] / np.prod(q[others])
            b = 0.0
            for k in others:
                rest = np.delete(others, np.flatnonzero(others == k))
                b += lam[k] / (p[k] * np.prod(q[rest]))
            target = math.sqrt(a) / (math.sqrt(a) + math.sqrt(b))
            x[i] = min(max(_logit(min(max(target, P_FLOOR), P_CEIL)), lo), hi)
            p[i] = _expit(x[i])
        f = float(_f_batch(lam, p[None, :])[0])
        if f < EARLY_EXIT or f_prev - f < opts.tolerance:
            break
    return p, f, it


def find_c1_witness(lam, opts=None):
    """Search for p in (0, 1)^M with single-packet load sum below one.

    Starts from the best point of a uniform grid (M <= 3) or from
    ``opts.n_starts`` seeded random starts (M > 3), refines by coordinate
    descent, and returns the witness only after re-checking
    :func:`c1_membership`.  Starts are merged deterministically: lowest value
    wins, ties go to the lexicographically smallest p.
    """
    opts = opts or WitnessOptions()
    lam = _check_open_unit("lambda", lam)
    m = lam.size
    if m <= 3:
        axis = np.arange(1, opts.grid_points + 1) / (opts.grid_points + 1)
        grid = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
        fg = _f_batch(lam, grid)
        best = int(np.argmin(fg))
        starts = grid[best:best + 1]
        init_f = float(fg[best])
    else:
        rng = np.random.default_rng(opts.seed)
        starts = rng.uniform(0.05, 0.95, size=(opts.n_starts, m))
        init_f = float(_f_batch(lam, starts).min())
    results = []
    total_it = 0
    for s in starts:
        p, f, it = _descend(lam, [_logit(t) for t in s], opts)
        total_it += it
        results.append((f, tuple(float(t) for t in p)))
        if f < EARLY_EXIT:
            break
    _, best_p = min(results)
    best_f = single_packet_load(lam, best_p)
    if best_f < 1.0 and c1_membership(lam, best_p):
        witness = best_p
    else:
        witness = None
    return WitnessResult(found=witness is not None, p=witness, best_p=best_p,
                         best_f=best_f, init_f=init_f, iterations=total_it)


def witness_config(lam, p):
    """Bernoulli-arrival, Bernoulli-window network for a rate point and attempt vector."""
    return bernoulli_network(list(lam), list(p))
