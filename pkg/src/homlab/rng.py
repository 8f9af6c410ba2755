"""The single seeded PRNG used everywhere.

SplitMix64: the state advances by the golden-ratio increment and each output
is the state passed through a 64-bit finaliser.  Subclassing ``random.Random``
gives ``randrange``, ``choice``, ``shuffle`` and friends on top of it.
"""

from __future__ import annotations

import random

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK
    return z ^ (z >> 31)


class SplitMix64(random.Random):
    def __init__(self, seed: int = 0):
        self._state = 0
        super().__init__(seed)

    def seed(self, a=0, version=2) -> None:
        self._state = int(a) & MASK

    def getstate(self):
        return self._state

    def setstate(self, state) -> None:
        self._state = state

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK
        return mix64(self._state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def getrandbits(self, k: int) -> int:
        if k <= 0:
            return 0
        out, have = 0, 0
        while have < k:
            out = (out << 64) | self.next_u64()
            have += 64
        return out >> (have - k)

    def fork(self, label: int) -> "SplitMix64":
        """An independent stream derived from this one and ``label``."""
        return SplitMix64(mix64(self.next_u64() ^ mix64(label)))


def derive_seed(seed: int, *labels) -> int:
    """Deterministic sub-seed from a base seed and a path of labels."""
    z = seed & MASK
    for label in labels:
        if isinstance(label, str):
            label = int.from_bytes(label.encode(), "little") & MASK
        z = mix64((z + GOLDEN) & MASK ^ mix64(label & MASK))
    return z
