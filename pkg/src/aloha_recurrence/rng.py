"""Counter-based random streams.

Every uniform draw is a pure function of a tuple of 64-bit words, hashed with
the SplitMix64 finalizer.  A simulation never carries mutable generator state:
the draw for (stream key, slot, user, tag) can be recomputed in any order and
in any chunking, which is what makes trajectories and replication batches
bit-reproducible.
"""
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

TAG_ARRIVAL = 1
TAG_WINDOW = 2
TAG_SAMPLE = 3

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 2.0 ** -53


def mix64(z):
    """SplitMix64 avalanche of a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return np.asarray(z ^ (z >> _S31), dtype=np.uint64)


def _as_u64(x):
    if isinstance(x, (int, np.integer)):
        return np.array([int(x) & MASK64], dtype=np.uint64)
    return np.asarray(x).astype(np.uint64)


def derive(*words):
    """Hash a sequence of words (ints or broadcastable uint64 arrays)."""
    h = np.array([GOLDEN], dtype=np.uint64)
    for w in words:
        with np.errstate(over="ignore"):
            h = mix64(h ^ mix64(_as_u64(w) + np.uint64(GOLDEN)))
    return h


def to_unit(h):
    """Map uint64 hashes to doubles in [0, 1) using the top 53 bits."""
    return (np.asarray(h, dtype=np.uint64) >> _S11).astype(np.float64) * _TO_UNIT


def replication_seed(master, r):
    """Stream key of replication ``r`` under ``master`` (scalar or array ``r``)."""
    out = derive(master, r)
    if np.ndim(r) == 0:
        return int(out[0])
    return out


def _user_tag_words(m):
    users = np.arange(m, dtype=np.uint64)
    tags = np.array([TAG_ARRIVAL, TAG_WINDOW], dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64((users[:, None] << np.uint64(8)) | tags[None, :]) + np.uint64(GOLDEN)


def slot_uniforms(keys, slots, m):
    """Uniforms for arrivals and windows.

    ``keys`` and ``slots`` broadcast against each other; the result has shape
    ``broadcast(keys, slots).shape + (m, 2)`` where the last axis is
    (arrival, window).
    """
    keys = np.asarray(keys, dtype=np.uint64)
    slots = np.asarray(slots, dtype=np.uint64)
    with np.errstate(over="ignore"):
        slot_key = mix64(keys ^ mix64(slots * np.uint64(GOLDEN) + np.uint64(TAG_SAMPLE)))
    words = _user_tag_words(m)
    return to_unit(mix64(slot_key[..., None, None] ^ words))


@dataclass(frozen=True)
class RngState:
    """Immutable position in a counter-based stream."""

    key: int
    counter: int = 0

    def uniform(self):
        return float(to_unit(derive(self.key, self.counter, TAG_SAMPLE))[0])

    def advance(self, n=1):
        return RngState(self.key, self.counter + n)
