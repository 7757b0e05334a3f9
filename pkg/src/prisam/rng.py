"""Seedable random stream with a documented, portable algorithm.

The generator is SplitMix64 (Steele, Lea, Flood 2014). It is tiny, has no
hidden global state, and produces the same byte-for-byte sequence on every
platform, which the reproducibility guarantees of the samplers and the
benchmark harness rely on. Draws happen outside the selection kernels: the
kernels take an already-drawn uniform as an argument.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """The SplitMix64 output permutation of a 64-bit value."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class RngStream:
    """Deterministic uniform stream.

    state <- state + 0x9E3779B97F4A7C15 (mod 2^64), output mix64(state).
    ``uniform`` maps the top 53 bits onto [0, 1).
    """

    __slots__ = ("seed", "counter", "_state")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self.counter = 0
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        self.counter += 1
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        k = int(self.uniform() * n)
        # floating point can round u * n up to n itself
        return n - 1 if k >= n else k

    def split(self, tag: int) -> "RngStream":
        """Child stream decorrelated from this one; does not consume draws."""
        return RngStream(mix64(self.seed ^ mix64(tag)))
