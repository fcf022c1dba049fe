"""Deterministic random number generation shared by the whole pipeline.

Every stochastic component (camera shot noise, population initialization,
mutation draws, per-capture seeds) draws from the same fully specified
generator so that two runs with the same seeds are bit-for-bit identical:

* stream: SplitMix64 over 64-bit state,
* uniforms: ``(word >> 11) * 2**-53`` in ``[0, 1)``,
* gaussians: Box-Muller on consecutive uniform pairs.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_TWO_NEG_53 = 2.0**-53
_TWO_PI = 2.0 * math.pi


def mix64(z: int) -> int:
    """SplitMix64 output permutation of a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Derive a child seed from a master seed and an index path.

    Used to give every capture, condition, and generation its own
    independent stream while keeping everything a pure function of the
    master seed.
    """
    state = master & MASK64
    for index in path:
        state = (state + GOLDEN) & MASK64
        state = mix64(state ^ mix64(index & MASK64))
    return state


class SplitMix64:
    """Sequential SplitMix64 stream with uniform and gaussian views."""

    def __init__(self, seed: int):
        self._state = seed & MASK64
        self._gauss_cache: float | None = None

    def next_word(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_word() >> 11) * _TWO_NEG_53

    def uniforms(self, n: int) -> list[float]:
        return [self.uniform() for _ in range(n)]

    def gauss(self) -> float:
        """Standard normal via Box-Muller; pairs consumed cos-then-sin."""
        if self._gauss_cache is not None:
            value = self._gauss_cache
            self._gauss_cache = None
            return value
        u1 = self.uniform()
        u2 = self.uniform()
        # u1 == 0 occurs with probability 2^-53; clamp to keep log finite.
        r = math.sqrt(-2.0 * math.log(max(u1, _TWO_NEG_53)))
        self._gauss_cache = r * math.sin(_TWO_PI * u2)
        return r * math.cos(_TWO_PI * u2)


def words(seed: int, n: int) -> np.ndarray:
    """Vectorized first ``n`` words of the SplitMix64 stream for ``seed``.

    Identical to ``n`` successive ``SplitMix64.next_word`` calls: state k
    is ``seed + k * GOLDEN`` (mod 2^64), so the whole stream maps over a
    closed form.
    """
    with np.errstate(over="ignore"):
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(seed & MASK64) + k * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def uniform_array(seed: int, n: int) -> np.ndarray:
    """Vectorized equivalent of ``n`` successive ``uniform()`` calls."""
    return (words(seed, n) >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53


def gauss_array(seed: int, n: int) -> np.ndarray:
    """Equivalent of ``n`` successive ``gauss()`` calls.

    Uniform words come from the vectorized stream; the Box-Muller
    transform goes through the same libm calls as the scalar path so
    both produce identical bits (numpy's SIMD trig can differ from libm
    in the last ulp).
    """
    pairs = (n + 1) // 2
    u = uniform_array(seed, 2 * pairs)
    out = np.empty(2 * pairs, dtype=np.float64)
    for k in range(pairs):
        r = math.sqrt(-2.0 * math.log(max(u[2 * k], _TWO_NEG_53)))
        angle = _TWO_PI * u[2 * k + 1]
        out[2 * k] = r * math.cos(angle)
        out[2 * k + 1] = r * math.sin(angle)
    return out[:n]
