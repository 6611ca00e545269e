"""Deterministic 64-bit random number generator.

xoshiro256** seeded through splitmix64. Pure integer arithmetic, so the
sequence is bit-identical on every platform and Python build. The full
state is four 64-bit words and can be serialized into checkpoints.
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: int):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, (z ^ (z >> 31)) & MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Rng:
    """Seedable xoshiro256** stream with serializable state."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        seed &= MASK64
        seed, self.s0 = _splitmix64(seed)
        seed, self.s1 = _splitmix64(seed)
        seed, self.s2 = _splitmix64(seed)
        seed, self.s3 = _splitmix64(seed)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n). Unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = MASK64 - (MASK64 + 1) % n
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.randrange(hi - lo + 1)

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def shuffle(self, seq) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randrange(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def sample(self, seq, k: int):
        """k distinct elements, order given by a partial Fisher-Yates."""
        if k > len(seq):
            raise ValueError("sample larger than population")
        pool = list(seq)
        out = []
        for _ in range(k):
            j = self.randrange(len(pool))
            out.append(pool.pop(j))
        return out

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller. Uses libm transcendentals; keep out of tick-loop state."""
        u1 = self.random()
        while u1 <= 1e-300:
            u1 = self.random()
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        return mu + sigma * r * math.cos(2.0 * math.pi * u2)

    def getstate(self):
        return (self.s0, self.s1, self.s2, self.s3)

    def setstate(self, state) -> None:
        self.s0, self.s1, self.s2, self.s3 = (s & MASK64 for s in state)
