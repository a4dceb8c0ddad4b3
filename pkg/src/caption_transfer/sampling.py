"""Seeded sampling that any language can reproduce bit for bit.

Generator: SplitMix64. Bounded draws use rejection sampling on the full
64-bit output; samples come from a partial Fisher-Yates shuffle of the
index range.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

PRNG_NAME = "splitmix64+rejection+partial-fisher-yates"
_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound)."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next()
            if x < limit:
                return x % bound


def sample_indices(population: int, n: int, seed: int) -> list[int]:
    """``n`` distinct indices from ``range(population)``, in ascending order."""
    if n > population:
        raise ValueError(f"cannot sample {n} items from a population of {population}")
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = SplitMix64(seed)
    idx = list(range(population))
    for i in range(n):
        j = i + rng.below(population - i)
        idx[i], idx[j] = idx[j], idx[i]
    return sorted(idx[:n])


def sample_negatives(corpus: Sequence[T], n: int, seed: int) -> list[T]:
    """Uniform sample without replacement, kept in corpus order."""
    return [corpus[i] for i in sample_indices(len(corpus), n, seed)]
