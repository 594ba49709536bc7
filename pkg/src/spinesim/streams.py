"""Counter-based random streams keyed by 64-bit integers.

Every individual of a simulated tree owns a stream whose key is a pure
function of ``(seed, replicate, label)``, so the law of a subtree does not
depend on the order in which the event loop visits individuals.  Scalar
draws go through a SplitMix64 finalizer (cheap, no object setup); bulk draws
(Gaussian increments of a diffusion, binomials) go through a lazily built
numpy ``Generator`` seeded from the same key.
"""
from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_M53 = 2.0 ** -53


def _fmix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_key(key: int, *indices: int) -> int:
    """Fold integer indices into a 64-bit key."""
    for i in indices:
        key = _fmix((_fmix(key & _MASK) + (int(i) + 1) * _GOLDEN) & _MASK)
    return key


class Stream:
    """A reproducible random stream.

    ``Stream(seed)`` and ``Stream.root(seed, purpose, replicate)`` are the
    usual entry points; ``spawn(i)`` gives the i-th child stream.
    """

    __slots__ = ("key", "_n", "_gen")

    def __init__(self, key: int):
        self.key = int(key) & _MASK
        self._n = 0
        self._gen = None

    @classmethod
    def root(cls, seed: int, *indices: int) -> "Stream":
        return cls(derive_key(_fmix(int(seed) & _MASK), *indices))

    def spawn(self, i: int) -> "Stream":
        return Stream(derive_key(self.key, i))

    def random(self) -> float:
        """Uniform draw on [0, 1)."""
        self._n += 1
        return (_fmix((self.key + self._n * _GOLDEN) & _MASK) >> 11) * _TWO_M53

    def exponential(self) -> float:
        """Standard exponential draw."""
        return -math.log1p(-self.random())

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(self.key)))
        return self._gen

    def __repr__(self):
        return f"Stream(key={self.key:#018x}, drawn={self._n})"


def as_stream(rng) -> Stream:
    """Accept a Stream or an integer seed."""
    if isinstance(rng, Stream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return Stream.root(int(rng))
    raise TypeError(f"expected a Stream or an integer seed, got {type(rng).__name__}")
