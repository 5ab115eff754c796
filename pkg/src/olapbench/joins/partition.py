"""Radix partitioning and in-place cracking of tuple relations.

A radix digit is the key bit range [shift, shift + radix_bits). The
partitioning operators group tuples by digit value; `crack_partition`
is the single-bit building block the cracking join recurses on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datagen import Relation
from ..parallel import WorkerTeam, chunk_bounds
from . import kernels


def _check_digit(radix_bits: int, shift: int) -> None:
    if radix_bits < 0 or shift < 0 or radix_bits + shift > 32:
        raise ValueError("radix digit must lie within the 32-bit key")


def _check_variant(kernel_variant: str) -> None:
    if kernel_variant not in kernels.VARIANTS:
        raise ValueError(f"kernel_variant must be one of {kernels.VARIANTS}")


def _digit_mask(radix_bits: int, shift: int) -> np.uint64:
    return np.uint64(((1 << radix_bits) - 1) << shift)


def thread_bases(hist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Turn per-thread digit counts (threads x digits) into partition
    offsets and per-thread exclusive write-start positions: thread t
    starts digit d at offsets[d] plus the digit-d counts of threads
    below t, which keeps the scattered order independent of the thread
    count."""
    offsets = np.zeros(hist.shape[1] + 1, dtype=np.uint64)
    np.cumsum(hist.sum(axis=0, dtype=np.uint64), out=offsets[1:])
    bases = offsets[:-1] + np.cumsum(hist, axis=0, dtype=np.uint64) - hist
    return offsets, bases


@dataclass(frozen=True)
class Histogram:
    """Tuple counts per radix digit value."""

    bins: np.ndarray
    radix_bits: int
    shift: int

    @property
    def partitions(self) -> int:
        return len(self.bins)


@dataclass(frozen=True)
class PartitionedRelation:
    """A reordered relation where digit-d tuples occupy
    [offsets[d], offsets[d+1]); input order survives within a partition."""

    relation: Relation
    offsets: np.ndarray
    radix_bits: int
    shift: int

    @property
    def partitions(self) -> int:
        return len(self.offsets) - 1

    def partition(self, d: int) -> np.ndarray:
        lo, hi = int(self.offsets[d]), int(self.offsets[d + 1])
        return self.relation.tuples[lo:hi]


def compute_histogram(
    data: Relation, radix_bits: int, shift: int = 0, kernel_variant: str = "naive"
) -> Histogram:
    """Count tuples per digit value; bins has 2**radix_bits entries."""
    _check_digit(radix_bits, shift)
    _check_variant(kernel_variant)
    bins = np.zeros(1 << radix_bits, dtype=np.uint64)
    rows = data.as_u64()
    kernels.HIST_KERNELS[kernel_variant](
        rows, 0, len(rows), _digit_mask(radix_bits, shift), np.uint64(shift), bins
    )
    return Histogram(bins=bins, radix_bits=radix_bits, shift=shift)


def radix_partition(
    data: Relation,
    radix_bits: int,
    shift: int = 0,
    threads: int = 1,
    kernel_variant: str = "naive",
) -> PartitionedRelation:
    """Out-of-place partition by digit value: histogram, prefix sums,
    then scatter. Thread t writes the digit-d run starting at
    offsets[d] plus the digit-d counts of threads below t, so the
    result does not depend on the thread count."""
    _check_digit(radix_bits, shift)
    _check_variant(kernel_variant)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    parts = 1 << radix_bits
    rows = data.as_u64()
    n = len(rows)
    mask = _digit_mask(radix_bits, shift)
    sh = np.uint64(shift)
    hist_kernel = kernels.HIST_KERNELS[kernel_variant]
    scatter_kernel = kernels.SCATTER_KERNELS[kernel_variant]
    bounds = chunk_bounds(n, threads)
    hist = np.zeros((threads, parts), dtype=np.uint64)
    out = np.empty(n, dtype=np.uint64)

    def histogram_chunk(tid):
        lo, hi = bounds[tid]
        hist_kernel(rows, lo, hi, mask, sh, hist[tid])

    def scatter_chunk(tid, bases):
        lo, hi = bounds[tid]
        scatter_kernel(rows, lo, hi, mask, sh, bases[tid], out)

    if threads == 1:
        histogram_chunk(0)
        offsets, bases = thread_bases(hist)
        scatter_chunk(0, bases)
    else:
        with WorkerTeam(threads) as team:
            team.run(histogram_chunk)
            offsets, bases = thread_bases(hist)
            team.run(lambda tid: scatter_chunk(tid, bases))

    return PartitionedRelation(
        relation=Relation(out.view(data.tuples.dtype)),
        offsets=offsets,
        radix_bits=radix_bits,
        shift=shift,
    )


def crack_partition(data: Relation, bit_index: int) -> int:
    """Split `data` in place around key bit `bit_index`: clear-bit
    tuples first, set-bit tuples after. Returns the split index.

    Mutates the relation's tuple array; order within each side is not
    preserved."""
    if not 0 <= bit_index < 32:
        raise ValueError("bit_index must lie in [0, 32)")
    rows = data.as_u64()
    return int(kernels.crack(rows, 0, len(rows), np.uint64(bit_index)))
