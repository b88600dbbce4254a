"""Counter-based random substreams.

Every random draw in the package is a pure function of ``(seed, stream index,
counter)``.  A stream index identifies one trial (linear runs) or one tree
(branching runs); the counter enumerates draws inside it.  Because nothing
depends on call order, results are identical no matter how trials are chunked
or how many workers evaluate them.

The mixing function is the SplitMix64 finalizer (Steele, Lea & Flood, 2014).
A stream key is ``mix64(mix64(seed) ^ (index * GOLDEN))`` and the ``j``-th
draw of that stream is ``mix64(key + (j + 1) * GOLDEN)``, i.e. exactly the
SplitMix64 generator started from ``key``.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

_G = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 avalanche finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _mix64_int(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_keys(seed: int, indices) -> np.ndarray:
    """Keys of the substreams ``indices`` derived from a 64-bit ``seed``."""
    if not 0 <= int(seed) <= _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    base = np.uint64(_mix64_int(int(seed)))
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base ^ (idx * _G))


def to_unit(bits: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles strictly inside (0, 1)."""
    return ((bits >> _S11).astype(np.float64) + 0.5) * 2.0**-53


def uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniform(0,1) draws for ``keys`` at ``counters`` (broadcast together)."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return to_unit(mix64(keys + (counters + np.uint64(1)) * _G))


class Substream:
    """Sequential view of one substream.

    Draws are handed out in counter order, so ``Substream(seed, i).uniform(5)``
    followed by ``.uniform(3)`` yields the same eight numbers as a single
    ``.uniform(8)`` call, and the same numbers the batched trial engine
    assigns to stream ``i``.
    """

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed)
        self.index = int(index)
        self._key = stream_keys(self.seed, self.index)
        self._counter = 0

    @property
    def counter(self) -> int:
        return self._counter

    def uniform(self, size: int | tuple[int, ...] | None = None):
        shape = () if size is None else (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        ctr = np.arange(self._counter, self._counter + count, dtype=np.uint64)
        self._counter += count
        out = uniforms(self._key, ctr).reshape(shape)
        return float(out) if size is None else out

    def spawn(self, index: int) -> "Substream":
        """Independent child stream, keyed by this stream's key and ``index``."""
        return Substream(int(self._key), index)
