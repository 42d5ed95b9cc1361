"""Counter-based random streams.

Every stream is a Philox generator. The *key* is derived from a user seed
and a path of integers (so ``RandomStream(7, 3)`` and ``RandomStream(7, 4)``
are unrelated), and :meth:`RandomStream.at` selects a disjoint block of the
counter space of the same key. Work that is split by replicate and sample
index can therefore draw from ``stream.at(b, j)`` in any order, on any
thread, and get the same numbers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_key_words(seed, path):
    seed = int(seed) & ((1 << 128) - 1)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return ss.generate_state(2, np.uint64)


class RandomStream:
    """Deterministic random source keyed by ``(seed, *path)``.

    Parameters
    ----------
    seed : int
        Master seed (any non-negative integer below 2**128).
    *path : int
        Optional key path; distinct paths give statistically independent
        streams.
    """

    def __init__(self, seed, *path, _counter=(0, 0), _key=None):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._key = _as_key_words(self.seed, self.path) if _key is None else _key
        self._counter = (int(_counter[0]) & _MASK64, int(_counter[1]) & _MASK64)
        bitgen = np.random.Philox(
            key=self._key, counter=[0, 0, self._counter[0], self._counter[1]]
        )
        self.generator = np.random.Generator(bitgen)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path}, counter={self._counter})"

    def spawn(self, *path):
        """Return an independent stream with a longer key path."""
        return RandomStream(self.seed, *self.path, *path)

    def at(self, i, j=0):
        """Return the sub-stream at counter block ``(i, j)`` of this key.

        Each block covers 2**128 counter values, far more than any
        consumer draws.
        """
        return RandomStream(self.seed, *self.path, _counter=(j, i), _key=self._key)

    def derive_seed(self, *path):
        """A 63-bit integer seed derived from this stream's key and ``path``."""
        words = _as_key_words(self.seed, self.path + tuple(path))
        return int(words[0] >> np.uint64(1))

    # thin pass-throughs used throughout the package
    def uniform(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high, size=None):
        return self.generator.integers(low, high, size=size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)


def as_stream(stream_or_seed):
    """Coerce ``None``, an int or a :class:`RandomStream` into a stream."""
    if isinstance(stream_or_seed, RandomStream):
        return stream_or_seed
    if stream_or_seed is None:
        return RandomStream(np.random.SeedSequence().entropy)
    return RandomStream(int(stream_or_seed))
