"""Counter-based random numbers keyed by (seed, position).

Every draw is a pure function of its key, so two passes over the same rows,
or reservoirs processed in any order, see identical values.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _splitmix(x):
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def hash64(seed, *keys):
    """Mix an integer seed with one or more integer key arrays into uint64 words."""
    with np.errstate(over="ignore"):
        h = _splitmix(np.asarray([int(seed) & _MASK], dtype=np.uint64))
        for key in keys:
            k = np.asarray(key).astype(np.uint64, copy=False)
            h = _splitmix(h ^ _splitmix(k))
    return h


def uniform01(seed, *keys):
    """Uniform doubles in (0, 1], one per key position."""
    h = hash64(seed, *keys)
    return ((h >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def derive_seed(seed, *keys):
    """Derive a child seed (python int) from a parent seed and integer keys."""
    return int(hash64(seed, *[np.asarray([k]) for k in keys])[0])
