"""Deterministic 64-bit pseudo-random streams (SplitMix64).

All data generation is keyed by (seed, index) through the SplitMix64
finalizer, so every generator is stateless, vectorizable, and produces
bit-identical output on any platform. Element i of a stream equals the
i-th output of the sequential reference generator seeded with `seed`.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over a uint64 array (wrapping arithmetic)."""
    z = x.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def mix64_int(x: int) -> int:
    """Scalar SplitMix64 finalizer on plain Python ints."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stream_range(seed: int, start: int, stop: int) -> np.ndarray:
    """Outputs start..stop-1 of the seeded stream, as uint64.

    Chunked generation: concatenating consecutive ranges reproduces
    ``stream(seed, stop)`` exactly.
    """
    if not 0 <= start <= stop:
        raise ValueError("need 0 <= start <= stop")
    idx = np.arange(start + 1, stop + 1, dtype=np.uint64)
    return mix64(np.uint64(seed & _MASK64) + idx * GOLDEN)


def stream(seed: int, n: int) -> np.ndarray:
    """First n outputs of SplitMix64 seeded with `seed`, as uint64."""
    if n < 0:
        raise ValueError("stream length must be >= 0")
    return stream_range(seed, 0, n)


def substream_seed(seed: int, label: int) -> int:
    """Derive an independent child seed for a labeled substream."""
    return mix64_int((seed & _MASK64) ^ mix64_int(label))


def permutation(n: int, seed: int) -> np.ndarray:
    """Uniform pseudo-random permutation of 0..n-1 (int64).

    Sorts indexes by their SplitMix64 rank; the stable sort makes the
    astronomically-unlikely rank collision deterministic as well.
    """
    ranks = stream(seed, n)
    return np.argsort(ranks, kind="stable")


def uniform_below(seed: int, n: int, bound: int) -> np.ndarray:
    """n pseudo-random uint64 draws from [0, bound).

    Uses modulo reduction; the bias is below bound / 2^64 per draw and
    irrelevant for the bounds used here (< 2^32).
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    return stream(seed, n) % np.uint64(bound)


def random_bytes(seed: int, n: int) -> np.ndarray:
    """n i.i.d. uniform bytes as a uint8 array.

    The byte sequence is the little-endian serialization of the word
    stream (8 bytes per output), identical on every platform.
    """
    if n < 0:
        raise ValueError("length must be >= 0")
    words = stream(seed, (n + 7) // 8)
    return words.astype("<u8", copy=False).view(np.uint8)[:n].copy()
