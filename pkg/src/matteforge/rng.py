"""Seeded, platform-portable pseudorandom generator.

All randomized operations in this package draw from :class:`Rng`, a
splitmix64 generator. The algorithm is fixed by construction (64-bit
integer arithmetic only), so a given seed yields the same sequence on
every platform and Python version. Floats are derived from the top 53
bits, integer draws use rejection sampling to stay unbiased.
"""

import hashlib

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Rng:
    """splitmix64 stream seeded with a 64-bit unsigned integer."""

    algorithm = "splitmix64"

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        """Uniform float in [low, high), from the top 53 bits of a draw."""
        u = (self.next_u64() >> 11) * 2.0**-53
        return low + (high - low) * u

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, label: str) -> int:
    """Stable 64-bit child seed for (seed, label).

    Uses blake2b over the decimal seed and the label, so per-item seeds
    are independent of processing order (and safe to use from worker
    pools).
    """
    digest = hashlib.blake2b(f"{seed & _MASK64}|{label}".encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "little")
