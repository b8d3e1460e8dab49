"""Exact small-instance reference: the queue chain on the box {0..N}^M.

Transitions are enumerated from the product law of the per-user (arrival,
window) draws.  Any next-state coordinate above N is clamped to N and the
clamped probability is recorded, so truncation error stays visible.
"""
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as splinalg

from .errors import SingularSystem, StateSpaceTooLarge, TruncationDominated
from .region import offered_rates

MAX_STATES_GUARD = 10_000_000
DIRECT_SOLVE_LIMIT = 100_000
ITERATIVE_RTOL = 1e-10
BOUNDARY_THRESHOLD = 1e-6


@dataclass(frozen=True)
class TruncatedChain:
    """Row-stochastic transition matrix on the box.

    State index of ``(q_1, ..., q_M)`` is ``sum_i q_i (N+1)^(M-1-i)``
    (row-major).  ``clamped[s]`` is the probability that a step from state
    ``s`` was clamped at the cap; ``boundary_mass`` is its largest value.
    ``tail_truncation`` is the total tail mass dropped from unbounded laws.
    """

    m: int
    n: int
    states: np.ndarray
    matrix: sparse.csr_matrix
    clamped: np.ndarray
    tail_truncation: float = 0.0

    @property
    def size(self):
        return self.states.shape[0]

    @property
    def boundary_mass(self):
        return float(self.clamped.max()) if self.clamped.size else 0.0

    def index(self, state):
        idx = 0
        for x in state:
            idx = idx * (self.n + 1) + int(x)
        return idx

    def row(self, state):
        """Transition probabilities out of ``state`` as {next_state: prob}."""
        i = self.index(state)
        r = self.matrix.getrow(i)
        return {tuple(int(x) for x in self.states[j]): float(p)
                for j, p in zip(r.indices, r.data)}

    def to_triplets(self, fh):
        """Write ``row col prob`` lines (0-based indices, repr floats)."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        fh.write(f"# states={self.size} m={self.m} n={self.n}\n")
        for k in order:
            fh.write(f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}\n")


def _table(d, role, user):
    if d.bounded:
        return np.asarray(d.pmf, dtype=float), 0.0
    warnings.warn(f"user {user} {role} law {d.kind} has unbounded support; "
                  f"truncated at cumulative mass {1 - d.truncated_mass:.15f}",
                  stacklevel=3)
    pmf = np.asarray(d.pmf, dtype=float)
    return pmf / pmf.sum(), d.truncated_mass


def build_truncated_chain(config, n):
    """Enumerate the exact transition law on {0..n}^M."""
    m = config.m
    n = int(n)
    if n < 1:
        raise ValueError("truncation level must be >= 1")
    n_states = (n + 1) ** m
    if m * n_states > MAX_STATES_GUARD:
        raise StateSpaceTooLarge(f"{n_states} states for M={m}, N={n}")
    arr, win = [], []
    tail = 0.0
    for i, (a, w) in enumerate(config.users):
        pa, ta = _table(a, "arrival", i)
        pw, tw = _table(w, "window", i)
        arr.append(pa)
        win.append(pw)
        tail += ta + tw

    grids = np.meshgrid(*([np.arange(n + 1)] * m), indexing="ij")
    states = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    s_idx = np.arange(n_states)

    # Service outcomes: (probability per state, served vector per state).
    att = np.stack([(states[:, i] >= 1) * (1.0 - win[i][0]) for i in range(m)], axis=1)
    outcomes = []
    p_success = np.zeros(n_states)
    for k in range(m):
        others = np.prod(np.delete(1.0 - att, k, axis=1), axis=1) if m > 1 else np.ones(n_states)
        for wv in range(1, len(win[k])):
            pw = win[k][wv]
            if pw == 0.0:
                continue
            prob = pw * (states[:, k] >= 1) * others
            served = np.zeros((n_states, m), dtype=np.int64)
            served[:, k] = np.minimum(states[:, k], wv)
            outcomes.append((prob, served))
            p_success += prob
    outcomes.append((np.clip(1.0 - p_success, 0.0, 1.0), np.zeros((n_states, m), dtype=np.int64)))

    arrival_combos = list(itertools.product(*[np.flatnonzero(t > 0.0) for t in arr]))
    rows, cols, vals = [], [], []
    clamped = np.zeros(n_states)
    radix = np.array([(n + 1) ** (m - 1 - i) for i in range(m)], dtype=np.int64)
    for prob, served in outcomes:
        keep = prob > 0.0
        if not keep.any():
            continue
        base = states[keep] - served[keep]
        for combo in arrival_combos:
            pa = math.prod(arr[i][combo[i]] for i in range(m))
            nxt = base + np.asarray(combo, dtype=np.int64)
            over = (nxt > n).any(axis=1)
            nxt = np.minimum(nxt, n)
            p = prob[keep] * pa
            rows.append(s_idx[keep])
            cols.append(nxt @ radix)
            vals.append(p)
            clamped += np.bincount(s_idx[keep][over], weights=p[over], minlength=n_states)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    mat = sparse.coo_matrix((vals, (rows, cols)), shape=(n_states, n_states)).tocsr()
    mat.sum_duplicates()
    return TruncatedChain(m=m, n=n, states=states, matrix=mat, clamped=clamped,
                          tail_truncation=tail)


@dataclass(frozen=True)
class ExactReturnTime:
    """Expected return time to the origin and truncation diagnostics.

    ``boundary_occupancy`` is the stationary probability of states with some
    queue at the cap; ``sensitivity`` is the expected number of clamped steps
    per excursion from the origin.
    """

    expected: float
    boundary_occupancy: float
    sensitivity: float
    n_reachable: int
    solver: str

    def to_dict(self):
        return {
            "expected_return_time": self.expected,
            "boundary_occupancy": self.boundary_occupancy,
            "sensitivity": self.sensitivity,
            "n_reachable": self.n_reachable,
            "solver": self.solver,
        }


def _solve(a, b, solver):
    if solver == "direct":
        x = splinalg.spsolve(a.tocsc(), b)
    else:
        x, info = splinalg.bicgstab(a, b, rtol=ITERATIVE_RTOL, atol=0.0, maxiter=100_000)
        if info != 0:
            raise SingularSystem(f"iterative solve did not converge (info={info}); "
                                 "the truncation may be dominated by the cap")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("hitting-time system is singular")
    res = np.linalg.norm(a @ x - b) / max(np.linalg.norm(b), 1e-300)
    if res > 1e-8:
        raise SingularSystem(f"hitting-time residual {res:.3g} too large")
    return x


def _stationary(sub, solver):
    """Stationary law of an irreducible sub-chain; the last balance equation
    is replaced by the normalization sum(pi) = 1."""
    size = sub.shape[0]
    a = (sparse.identity(size, format="csr") - sub).T.tolil()
    a[size - 1, :] = np.ones(size)
    b = np.zeros(size)
    b[-1] = 1.0
    pi = _solve(a.tocsr(), b, solver)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def exact_return_time(chain, threshold=BOUNDARY_THRESHOLD, strict=True):
    """E[T] for the truncated chain started at the origin.

    The stationary law pi of the states reachable from the origin is solved
    first (directly, or above ``DIRECT_SOLVE_LIMIT`` states from the expected
    visits per excursion by BiCGSTAB).  Its mass on states with a queue at the cap is the boundary
    occupancy, and ``sum_s pi(s) clamped(s) / pi(0)`` the expected number of
    clamped steps per excursion.  With ``strict``, either exceeding
    ``threshold`` raises :class:`TruncationDominated`.  Otherwise the
    hitting times h of the origin solve ``(I - P_RR) h = 1`` over the
    reachable non-origin states R, ``E[T] = 1 + sum_s P(0, s) h(s)``, and the
    result must agree with ``1 / pi(0)``.
    """
    P = chain.matrix
    origin = 0
    reach = csgraph.breadth_first_order(P, origin, directed=True,
                                        return_predecessors=False)
    reach = np.sort(reach)
    if reach.size == 1:
        return ExactReturnTime(1.0, 0.0, float(chain.clamped[origin]), 1, "trivial")
    back = csgraph.breadth_first_order(P.T.tocsr(), origin, directed=True,
                                       return_predecessors=False)
    if np.setdiff1d(reach, back).size:
        raise SingularSystem("some reachable states never return to the origin")
    solver = "direct" if reach.size <= DIRECT_SOLVE_LIMIT else "bicgstab"

    rest = reach[1:]
    a = sparse.identity(rest.size, format="csr") - P[rest][:, rest]
    p0 = np.asarray(P[origin][:, rest].todense()).ravel()
    if solver == "direct":
        pi = _stationary(P[reach][:, reach], solver)
    else:
        # expected visits per excursion; pi = (1, g) / (1 + sum g)
        g = _solve(a.T.tocsr(), p0, solver)
        pi = np.concatenate(([1.0], g)) / (1.0 + g.sum())
    at_cap = (chain.states[reach] == chain.n).any(axis=1)
    occupancy = float(pi[at_cap].sum())
    pi0 = float(pi[0])
    sensitivity = float(pi @ chain.clamped[reach]) / pi0 if pi0 > 0.0 else math.inf
    if strict and (occupancy > threshold or sensitivity > threshold):
        raise TruncationDominated(
            f"truncation at N={chain.n} dominates: boundary occupancy {occupancy:.3g}, "
            f"clamped steps per excursion {sensitivity:.3g} (threshold {threshold:g})",
            boundary_occupancy=occupancy, sensitivity=sensitivity)

    h = _solve(a, np.ones(rest.size), solver)
    expected = 1.0 + float(p0 @ h)
    if abs(expected * pi0 - 1.0) > 1e-6:
        raise SingularSystem(
            f"return time {expected!r} disagrees with 1/pi(0) = {1.0 / pi0!r}")
    return ExactReturnTime(expected, occupancy, sensitivity, reach.size, solver)


def saturated_drift(config):
    """``lambda_i - v_i``: mean one-slot change of each queue when all are backlogged."""
    return config.lambdas - offered_rates(config.mean_windows, config.attempt_probs)
