"""
Deterministic random stream for server offer orders.

Built on numpy's PCG64 bit generator, drawing raw 64-bit words
so that results don't depend on numpy's distribution code.
"""

from typing import MutableSequence, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1
ALGORITHM = "pcg64"

T = TypeVar("T")


def derive_seed(base_seed: int, trial: int) -> int:
    """
    per-trial seed: base_seed XOR trial, kept to 64 bits
    """
    return (base_seed ^ trial) & MASK64


class RngStream:
    def __init__(self, seed: int):
        if seed < 0 or seed > MASK64:
            raise ValueError(f"seed {seed} not a 64-bit unsigned integer")
        self.seed = seed
        self._bits = np.random.PCG64(seed)

    @property
    def algorithm(self) -> str:
        return ALGORITHM

    def next64(self) -> int:
        return int(self._bits.random_raw())

    def randbelow(self, n: int) -> int:
        """
        uniform integer in [0, n), by rejection
        """
        if n <= 0:
            raise ValueError(f"randbelow({n})")
        limit = ((1 << 64) // n) * n
        while True:
            v = self.next64()
            if v < limit:
                return v % n

    def shuffle(self, items: MutableSequence[T]) -> None:
        """
        in-place Fisher-Yates
        """
        for k in range(len(items) - 1, 0, -1):
            j = self.randbelow(k + 1)
            items[k], items[j] = items[j], items[k]

    def permutation(self, n: int) -> list[int]:
        order = list(range(n))
        self.shuffle(order)
        return order

    def __repr__(self) -> str:
        return f"RngStream({ALGORITHM}, seed={self.seed})"
