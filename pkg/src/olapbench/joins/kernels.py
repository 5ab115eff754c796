"""Compiled kernels for radix partitioning, cracking, and hash joins.

The digit-driven loops (histogram, scatter, chain build) come in three
interchangeable shapes:

* ``naive``: one tuple per iteration;
* ``unrolled8``: eight digit computations batched ahead of their eight
  table updates, breaking the per-tuple dependence chain;
* ``simd32``: 32 digits written to a scratch buffer by a trivially
  vectorizable loop, then consumed by scalar table updates.

All kernels release the GIL and work on the uint64 view of tuple
arrays: key in the low 32 bits, payload in the high 32.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .. import lowlevel

VARIANTS = ("naive", "unrolled8", "simd32")
VARIANT_IDS = {name: i for i, name in enumerate(VARIANTS)}

_M32 = np.uint64(0xFFFFFFFF)
_ONE = np.uint64(1)


def next_pow2(x: int) -> int:
    return 1 << max(0, x - 1).bit_length()


# ---------------------------------------------------------------- histograms


@njit(nogil=True, cache=True)
def hist_naive(rows, lo, hi, mask, shift, bins):
    for i in range(lo, hi):
        bins[(rows[i] & mask) >> shift] += _ONE


@njit(nogil=True, cache=True)
def hist_unrolled8(rows, lo, hi, mask, shift, bins):
    i = lo
    while i + 8 <= hi:
        d0 = (rows[i] & mask) >> shift
        d1 = (rows[i + 1] & mask) >> shift
        d2 = (rows[i + 2] & mask) >> shift
        d3 = (rows[i + 3] & mask) >> shift
        d4 = (rows[i + 4] & mask) >> shift
        d5 = (rows[i + 5] & mask) >> shift
        d6 = (rows[i + 6] & mask) >> shift
        d7 = (rows[i + 7] & mask) >> shift
        bins[d0] += _ONE
        bins[d1] += _ONE
        bins[d2] += _ONE
        bins[d3] += _ONE
        bins[d4] += _ONE
        bins[d5] += _ONE
        bins[d6] += _ONE
        bins[d7] += _ONE
        i += 8
    while i < hi:
        bins[(rows[i] & mask) >> shift] += _ONE
        i += 1


@njit(nogil=True, cache=True)
def hist_simd32(rows, lo, hi, mask, shift, bins):
    digits = np.empty(32, np.uint64)
    i = lo
    while i + 32 <= hi:
        for j in range(32):
            digits[j] = (rows[i + j] & mask) >> shift
        for j in range(32):
            bins[digits[j]] += _ONE
        i += 32
    while i < hi:
        bins[(rows[i] & mask) >> shift] += _ONE
        i += 1


HIST_KERNELS = {
    "naive": hist_naive,
    "unrolled8": hist_unrolled8,
    "simd32": hist_simd32,
}


# ------------------------------------------------------------------ scatter
# dests[d] is the running write cursor for digit d; kernels advance it.


@njit(nogil=True, cache=True)
def scatter_naive(rows, lo, hi, mask, shift, dests, out):
    for i in range(lo, hi):
        d = (rows[i] & mask) >> shift
        pos = dests[d]
        out[pos] = rows[i]
        dests[d] = pos + _ONE


@njit(nogil=True, cache=True)
def scatter_unrolled8(rows, lo, hi, mask, shift, dests, out):
    i = lo
    while i + 8 <= hi:
        d0 = (rows[i] & mask) >> shift
        d1 = (rows[i + 1] & mask) >> shift
        d2 = (rows[i + 2] & mask) >> shift
        d3 = (rows[i + 3] & mask) >> shift
        d4 = (rows[i + 4] & mask) >> shift
        d5 = (rows[i + 5] & mask) >> shift
        d6 = (rows[i + 6] & mask) >> shift
        d7 = (rows[i + 7] & mask) >> shift
        # updates stay sequential: duplicate digits share a cursor
        out[dests[d0]] = rows[i]
        dests[d0] += _ONE
        out[dests[d1]] = rows[i + 1]
        dests[d1] += _ONE
        out[dests[d2]] = rows[i + 2]
        dests[d2] += _ONE
        out[dests[d3]] = rows[i + 3]
        dests[d3] += _ONE
        out[dests[d4]] = rows[i + 4]
        dests[d4] += _ONE
        out[dests[d5]] = rows[i + 5]
        dests[d5] += _ONE
        out[dests[d6]] = rows[i + 6]
        dests[d6] += _ONE
        out[dests[d7]] = rows[i + 7]
        dests[d7] += _ONE
        i += 8
    while i < hi:
        d = (rows[i] & mask) >> shift
        out[dests[d]] = rows[i]
        dests[d] += _ONE
        i += 1


@njit(nogil=True, cache=True)
def scatter_simd32(rows, lo, hi, mask, shift, dests, out):
    digits = np.empty(32, np.uint64)
    i = lo
    while i + 32 <= hi:
        for j in range(32):
            digits[j] = (rows[i + j] & mask) >> shift
        for j in range(32):
            d = digits[j]
            out[dests[d]] = rows[i + j]
            dests[d] += _ONE
        i += 32
    while i < hi:
        d = (rows[i] & mask) >> shift
        out[dests[d]] = rows[i]
        dests[d] += _ONE
        i += 1


SCATTER_KERNELS = {
    "naive": scatter_naive,
    "unrolled8": scatter_unrolled8,
    "simd32": scatter_simd32,
}


# ------------------------------------------------------------------- cracking


@njit(nogil=True, cache=True)
def crack(rows, lo, hi, bit):
    """Two-pointer in-place split of [lo, hi) on key bit `bit`.

    Returns the first index of the upper (bit set) side."""
    i = lo
    j = hi - 1
    while i <= j:
        if (rows[i] >> bit) & _ONE == np.uint64(0):
            i += 1
        elif (rows[j] >> bit) & _ONE == _ONE:
            j -= 1
        else:
            t = rows[i]
            rows[i] = rows[j]
            rows[j] = t
            i += 1
            j -= 1
    return i


# ------------------------------------------------------- partition-local join


@njit(nogil=True, cache=True)
def join_partitions(
    rowsb, offsb, rowsp, offsp, f_lo, f_hi, hshift, variant, heads, nexts,
    out, cursor, materialize,
):
    """Build-and-probe over the partition pairs [f_lo, f_hi).

    For each pair, a bucket-chained table keyed on the key bits above
    `hshift` is built from the build partition (loop shape per
    `variant`), then probed. Matches go to out[cursor:] as
    (key, build payload, probe payload) rows when materializing.
    Returns (matches, cursor, build_ticks, probe_ticks); the tick
    totals come from the cycle counter around each section.
    """
    matches = 0
    build_ticks = np.uint64(0)
    probe_ticks = np.uint64(0)
    digits = np.empty(32, np.int64)
    for f in range(f_lo, f_hi):
        blo = np.int64(offsb[f])
        bhi = np.int64(offsb[f + 1])
        plo = np.int64(offsp[f])
        phi = np.int64(offsp[f + 1])
        m = bhi - blo
        if m <= 0 or phi <= plo:
            continue
        nb = np.int64(1)
        while nb < m:
            nb <<= 1
        hmask = np.uint64(nb - 1)
        t0 = lowlevel.readcycles()
        for b in range(nb):
            heads[b] = -1
        if variant == 0:
            for i in range(blo, bhi):
                h = np.int64(((rowsb[i] & _M32) >> hshift) & hmask)
                nexts[i - blo] = heads[h]
                heads[h] = i - blo
        elif variant == 1:
            i = blo
            while i + 8 <= bhi:
                h0 = np.int64(((rowsb[i] & _M32) >> hshift) & hmask)
                h1 = np.int64(((rowsb[i + 1] & _M32) >> hshift) & hmask)
                h2 = np.int64(((rowsb[i + 2] & _M32) >> hshift) & hmask)
                h3 = np.int64(((rowsb[i + 3] & _M32) >> hshift) & hmask)
                h4 = np.int64(((rowsb[i + 4] & _M32) >> hshift) & hmask)
                h5 = np.int64(((rowsb[i + 5] & _M32) >> hshift) & hmask)
                h6 = np.int64(((rowsb[i + 6] & _M32) >> hshift) & hmask)
                h7 = np.int64(((rowsb[i + 7] & _M32) >> hshift) & hmask)
                nexts[i - blo] = heads[h0]
                heads[h0] = i - blo
                nexts[i + 1 - blo] = heads[h1]
                heads[h1] = i + 1 - blo
                nexts[i + 2 - blo] = heads[h2]
                heads[h2] = i + 2 - blo
                nexts[i + 3 - blo] = heads[h3]
                heads[h3] = i + 3 - blo
                nexts[i + 4 - blo] = heads[h4]
                heads[h4] = i + 4 - blo
                nexts[i + 5 - blo] = heads[h5]
                heads[h5] = i + 5 - blo
                nexts[i + 6 - blo] = heads[h6]
                heads[h6] = i + 6 - blo
                nexts[i + 7 - blo] = heads[h7]
                heads[h7] = i + 7 - blo
                i += 8
            while i < bhi:
                h = np.int64(((rowsb[i] & _M32) >> hshift) & hmask)
                nexts[i - blo] = heads[h]
                heads[h] = i - blo
                i += 1
        else:
            i = blo
            while i + 32 <= bhi:
                for j in range(32):
                    digits[j] = np.int64(((rowsb[i + j] & _M32) >> hshift) & hmask)
                for j in range(32):
                    h = digits[j]
                    nexts[i + j - blo] = heads[h]
                    heads[h] = i + j - blo
                i += 32
            while i < bhi:
                h = np.int64(((rowsb[i] & _M32) >> hshift) & hmask)
                nexts[i - blo] = heads[h]
                heads[h] = i - blo
                i += 1
        t1 = lowlevel.readcycles()
        build_ticks += t1 - t0
        if materialize:
            for i in range(plo, phi):
                k = rowsp[i] & _M32
                c = heads[np.int64((k >> hshift) & hmask)]
                while c >= 0:
                    if (rowsb[blo + c] & _M32) == k:
                        out[cursor, 0] = np.uint32(k)
                        out[cursor, 1] = np.uint32(rowsb[blo + c] >> np.uint64(32))
                        out[cursor, 2] = np.uint32(rowsp[i] >> np.uint64(32))
                        cursor += 1
                        matches += 1
                    c = nexts[c]
        else:
            for i in range(plo, phi):
                k = rowsp[i] & _M32
                c = heads[np.int64((k >> hshift) & hmask)]
                while c >= 0:
                    if (rowsb[blo + c] & _M32) == k:
                        matches += 1
                    c = nexts[c]
        t2 = lowlevel.readcycles()
        probe_ticks += t2 - t1
    return matches, cursor, build_ticks, probe_ticks


# ---------------------------------------------------------- shared hash table
# One table over the whole build side: heads/nexts hold global tuple
# indexes, a one-byte spin latch per bucket serializes inserts.


@njit(nogil=True, cache=True)
def pht_build(rows, lo, hi, hmask, heads, nexts, latches):
    for i in range(lo, hi):
        h = np.int64(rows[i] & _M32 & hmask)
        while lowlevel.atomic_xchg_u8(latches, h, np.uint8(1)) != np.uint8(0):
            pass
        nexts[i] = heads[h]
        heads[h] = i
        lowlevel.atomic_release_u8(latches, h, np.uint8(0))


@njit(nogil=True, cache=True)
def pht_probe_count(rowsb, rowsp, lo, hi, hmask, heads, nexts):
    matches = 0
    for i in range(lo, hi):
        k = rowsp[i] & _M32
        c = heads[np.int64(k & hmask)]
        while c >= 0:
            if (rowsb[c] & _M32) == k:
                matches += 1
            c = nexts[c]
    return matches


@njit(nogil=True, cache=True)
def pht_probe_mat(rowsb, rowsp, lo, hi, hmask, heads, nexts, out, cursor):
    matches = 0
    for i in range(lo, hi):
        k = rowsp[i] & _M32
        c = heads[np.int64(k & hmask)]
        while c >= 0:
            if (rowsb[c] & _M32) == k:
                out[cursor, 0] = np.uint32(k)
                out[cursor, 1] = np.uint32(rowsb[c] >> np.uint64(32))
                out[cursor, 2] = np.uint32(rowsp[i] >> np.uint64(32))
                cursor += 1
                matches += 1
            c = nexts[c]
    return matches, cursor
