"""Join relations and scan columns: packed tuple storage and generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import prng

# One row: 32-bit key + 32-bit payload, packed into 8 bytes.
TUPLE_DTYPE = np.dtype([("key", "<u4"), ("payload", "<u4")])

_LABEL_BUILD = 0x42
_LABEL_PROBE = 0x50

_CHUNK = 1 << 22  # generation chunk, bounds temporary memory


@dataclass(frozen=True)
class Relation:
    """A contiguous array of 8-byte (key, payload) tuples.

    A relation is "primary" when each key occurs exactly once; join build
    sides must be primary. The kernels operate on the 64-bit row view
    (key in the low half, payload in the high half, little-endian).
    """

    tuples: np.ndarray

    def __post_init__(self):
        if self.tuples.dtype != TUPLE_DTYPE or self.tuples.ndim != 1:
            raise ValueError("relation needs a 1-d array of (u32 key, u32 payload)")
        if not self.tuples.flags.c_contiguous:
            raise ValueError("relation storage must be contiguous")

    @property
    def cardinality(self) -> int:
        return self.tuples.shape[0]

    @property
    def keys(self) -> np.ndarray:
        return self.tuples["key"]

    @property
    def payloads(self) -> np.ndarray:
        return self.tuples["payload"]

    def as_u64(self) -> np.ndarray:
        """Zero-copy row view used by the compiled kernels."""
        return self.tuples.view(np.uint64)

    @staticmethod
    def from_arrays(keys: np.ndarray, payloads: np.ndarray) -> "Relation":
        t = np.empty(len(keys), dtype=TUPLE_DTYPE)
        t["key"] = keys
        t["payload"] = payloads
        return Relation(t)


def generate_fk_pair(
    build_cardinality: int, probe_cardinality: int, seed: int
) -> tuple[Relation, Relation]:
    """Seeded foreign-key join pair.

    The build relation holds the keys 1..build_cardinality in uniformly
    shuffled order (each exactly once); every probe key is an independent
    uniform draw from that key set, so the pair is FK-closed by
    construction. Payload = key. Same seed, same output, bit for bit.
    """
    if build_cardinality < 1:
        raise ValueError("build cardinality must be >= 1")
    if probe_cardinality < 0:
        raise ValueError("probe cardinality must be >= 0")

    order = prng.permutation(build_cardinality, prng.substream_seed(seed, _LABEL_BUILD))
    build_keys = (order + 1).astype(np.uint32)

    probe_seed = prng.substream_seed(seed, _LABEL_PROBE)
    probe_keys = np.empty(probe_cardinality, dtype=np.uint32)
    for lo in range(0, probe_cardinality, _CHUNK):
        hi = min(lo + _CHUNK, probe_cardinality)
        words = prng.stream_range(probe_seed, lo, hi)
        probe_keys[lo:hi] = words % np.uint64(build_cardinality) + np.uint64(1)

    return (
        Relation.from_arrays(build_keys, build_keys),
        Relation.from_arrays(probe_keys, probe_keys),
    )


def generate_column(length: int, seed: int) -> np.ndarray:
    """Uniform i.i.d. byte column of the given length, seeded."""
    return prng.random_bytes(seed, length)
