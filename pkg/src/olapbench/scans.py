"""Predicate scans over byte columns producing bit vectors or row indexes.

A scan checks every byte of a uint8 column against an inclusive range
and reports the qualifying rows either as a packed bitmap (bit i set
means row i matched, LSB first within each 64-bit word) or as a dense,
increasing list of 64-bit row ids. The hot loop handles 64 bytes per
step through a single wide compare that yields the packed mask word
directly; row counts that are not a multiple of 64 get a scalar tail,
so trailing bits of the last word stay zero.

Threading splits the column into contiguous chunks whose boundaries are
multiples of 64 rows, which keeps each output word owned by exactly one
thread. Index scans stage matches in a scratch region sized for the
worst case (one slot per row) and compact the per-chunk runs afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import lowlevel
from .parallel import WorkerTeam, chunk_bounds


@dataclass(frozen=True)
class ScanPredicate:
    """Inclusive byte range [lower, upper]."""

    lower: int
    upper: int

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper <= 255:
            raise ValueError(
                f"need 0 <= lower <= upper <= 255, got [{self.lower}, {self.upper}]"
            )

    @classmethod
    def for_selectivity(cls, fraction: float) -> "ScanPredicate":
        """Range [0, ceil(256*fraction)-1], hitting that share of uniform bytes."""
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {fraction}")
        return cls(0, math.ceil(256 * fraction) - 1)


@dataclass(frozen=True)
class BitVector:
    """Packed match bitmap; bit i of words[i // 64] stands for row i."""

    words: np.ndarray
    length_bits: int

    def popcount(self) -> int:
        return int(np.unpackbits(self.words.view(np.uint8)).sum())


@dataclass(frozen=True)
class IndexVector:
    """Row ids of the matches, strictly increasing."""

    indexes: np.ndarray

    @property
    def count(self) -> int:
        return len(self.indexes)


@njit(nogil=True, cache=True)
def _scan_words(col, lo_row, hi_row, lo, hi, words, word):
    # lo_row must be a multiple of 64 and word == lo_row // 64
    i = lo_row
    while i + 64 <= hi_row:
        words[word] = lowlevel.cmp_range_64(col, i, lo, hi)
        i += 64
        word += 1
    if i < hi_row:
        tail = np.uint64(0)
        for j in range(i, hi_row):
            v = col[j]
            if v >= lo and v <= hi:
                tail |= np.uint64(1) << np.uint64(j - i)
        words[word] = tail


@njit(nogil=True, cache=True)
def _scan_collect(col, lo_row, hi_row, lo, hi, out, cursor):
    for i in range(lo_row, hi_row):
        v = col[i]
        if v >= lo and v <= hi:
            out[cursor] = i
            cursor += 1
    return cursor


def _check_column(column) -> None:
    if not (
        isinstance(column, np.ndarray)
        and column.dtype == np.uint8
        and column.ndim == 1
        and column.flags.c_contiguous
    ):
        raise ValueError("column must be a contiguous one-dimensional uint8 array")


def scan_bitvector(column, pred: ScanPredicate, threads: int = 1, out=None) -> BitVector:
    """Scan `column` with `pred` and return the packed match bitmap.

    `out`, when given, must hold ceil(len(column) / 64) uint64 words; it
    is filled in place and becomes the result's word storage, so callers
    can keep allocation out of the measured region.
    """
    _check_column(column)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    n = len(column)
    n_words = (n + 63) // 64
    if out is None:
        out = np.empty(n_words, np.uint64)
    elif not (
        isinstance(out, np.ndarray) and out.dtype == np.uint64 and len(out) == n_words
    ):
        raise ValueError(f"out must be a uint64 array of exactly {n_words} words")
    lo, hi = np.uint8(pred.lower), np.uint8(pred.upper)
    if threads == 1 or n < 64 * threads:
        _scan_words(column, 0, n, lo, hi, out, 0)
        return BitVector(words=out, length_bits=n)
    bounds = chunk_bounds(n, threads, align=64)

    def work(tid):
        lo_row, hi_row = bounds[tid]
        if lo_row < hi_row:
            _scan_words(column, lo_row, hi_row, lo, hi, out, lo_row // 64)

    with WorkerTeam(threads) as team:
        team.run(work)
    return BitVector(words=out, length_bits=n)


def scan_indexes(column, pred: ScanPredicate, threads: int = 1, scratch=None) -> IndexVector:
    """Scan `column` with `pred` and return the matching row ids.

    `scratch`, when given, must hold at least len(column) uint64 slots
    (the worst case of every row matching); it backs the per-thread
    staging regions so the timed path allocates nothing.
    """
    _check_column(column)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    n = len(column)
    if scratch is None:
        scratch = np.empty(n, np.uint64)
    elif not (
        isinstance(scratch, np.ndarray)
        and scratch.dtype == np.uint64
        and len(scratch) >= n
    ):
        raise ValueError(f"scratch must be a uint64 array of at least {n} slots")
    lo, hi = np.uint8(pred.lower), np.uint8(pred.upper)
    if threads == 1 or n < 64 * threads:
        end = _scan_collect(column, 0, n, lo, hi, scratch, 0)
        return IndexVector(indexes=scratch[:end].copy())
    bounds = chunk_bounds(n, threads, align=64)
    ends = np.zeros(threads, np.int64)

    def work(tid):
        lo_row, hi_row = bounds[tid]
        ends[tid] = _scan_collect(column, lo_row, hi_row, lo, hi, scratch, lo_row)

    with WorkerTeam(threads) as team:
        team.run(work)
    counts = [int(ends[t]) - bounds[t][0] for t in range(threads)]
    result = np.empty(sum(counts), np.uint64)
    pos = 0
    for t in range(threads):
        lo_row = bounds[t][0]
        result[pos : pos + counts[t]] = scratch[lo_row : lo_row + counts[t]]
        pos += counts[t]
    return IndexVector(indexes=result)
