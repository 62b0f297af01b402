"""Deterministic random streams.

The whole simulator draws randomness from SplitMix64 streams.  SplitMix64 is
a 64-bit counter-based generator: output i of a stream with start state s is
``mix64(s + i * GOLDEN)``, which makes scalar draws and vectorised batch draws
produce identical sequences.  Independent streams are derived by hashing
(seed, purpose tag, index), so adding agents or frames never perturbs the
draws of any other stream.

Normal variates use the Box-Muller transform, cosine branch only (one normal
per pair of uniforms), so sequences are reproducible from the uniform stream
alone.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_TWO_POW_NEG53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


def mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash (offset 0xcbf29ce484222325, prime 0x100000001b3)."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def box_muller(u1: float, u2: float) -> float:
    """Standard-normal variate from two uniforms, cosine branch.

    m = sqrt(-2 ln u1) * cos(2 pi u2); u1 must lie in (0, 1].
    """
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


class Stream:
    """One SplitMix64 stream; scalar and vector draws share a sequence."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        """Uniform in [0, 1): top 53 bits of one u64 draw."""
        return (self.next_u64() >> 11) * _TWO_POW_NEG53

    def uniform_open(self) -> float:
        """Uniform in (0, 1]: zero excluded so log() is always finite."""
        return ((self.next_u64() >> 11) + 1) * _TWO_POW_NEG53

    def normal(self) -> float:
        """Standard-normal draw; consumes exactly two u64 draws."""
        u1 = self.uniform_open()
        u2 = self.uniform()
        return box_muller(u1, u2)

    def _raw_array(self, n: int) -> np.ndarray:
        counters = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
        z = counters + np.uint64(self.state)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GOLDEN) & _MASK64
        return z

    def uniform_array(self, n: int) -> np.ndarray:
        """Batch of n uniforms in [0, 1); same sequence as n uniform() calls."""
        return (self._raw_array(n) >> np.uint64(11)).astype(np.float64) * _TWO_POW_NEG53

    def normal_array(self, n: int) -> np.ndarray:
        """Batch of n standard normals; same sequence as n normal() calls."""
        raw = (self._raw_array(2 * n) >> np.uint64(11)).astype(np.float64)
        u1 = (raw[0::2] + 1.0) * _TWO_POW_NEG53
        u2 = raw[1::2] * _TWO_POW_NEG53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def derive_stream(seed: int, tag: str, index: int = 0) -> Stream:
    """Derive an independent stream from (seed, tag, index).

    Start state = mix64(mix64(seed ^ fnv1a64(tag)) ^ index).  Distinct tags or
    indices give unrelated sequences; the scheme is part of the documented
    reproducibility contract.
    """
    h = mix64((seed & _MASK64) ^ fnv1a64(tag.encode("utf-8")))
    return Stream(mix64(h ^ (index & _MASK64)))
