"""Portable seeded random numbers.

The generator is xorshift64* (Vigna, 2016) seeded through one round of
splitmix64, so that every stream is fixed by its integer seed and can be
reproduced exactly from the formulas below in any language:

    seeding:   z = (seed + 0x9E3779B97F4A7C15) mod 2**64
               z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
               z = (z ^ (z >> 27)) * 0x94D049BB133111EB
               state = z ^ (z >> 31)          (0 replaced by 0x9E3779B97F4A7C15)
    step:      x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
               output = (x * 0x2545F4914F6CDD1D) mod 2**64
    uniform:   (output >> 11) * 2**-53        in [0, 1)
    gaussian:  Box-Muller on (u1, u2):  sqrt(-2 ln(1 - u1)) * cos(2 pi u2),
               second value ... * sin(2 pi u2) is cached for the next call.

All arithmetic is on Python integers masked to 64 bits.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(seed: int) -> int:
    z = (seed + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class ShiftRegisterRNG:
    """xorshift64* stream with uniform and standard-normal draws."""

    def __init__(self, seed: int):
        state = splitmix64(int(seed) & _MASK)
        self._state = state or _GOLDEN
        self._spare: float | None = None

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def gauss(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normal_array(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.array([self.gauss() for _ in range(n)], dtype=float).reshape(shape)

    def complex_normal(self, shape) -> np.ndarray:
        """Entries ``x + i y`` with ``x, y`` drawn alternately (real first) in row-major order."""
        flat = self.normal_array((int(np.prod(shape)), 2))
        return (flat[:, 0] + 1j * flat[:, 1]).reshape(shape)


def derive_seed(seed: int, *labels: int) -> int:
    """Deterministic child seed for sub-streams (e.g. instance ``i`` of a scan).

    The parent is mixed before each label is folded in, so ``(seed, i)`` and
    ``(seed ^ i, 0)`` give unrelated children.
    """
    z = splitmix64(int(seed) & _MASK)
    for lab in labels:
        z = splitmix64(z ^ (int(lab) & _MASK))
    return z
