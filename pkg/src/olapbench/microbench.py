"""Memory-subsystem micro-benchmarks.

Three access patterns over plain arrays of 8-byte slots:

* ``chase_chain``: dependent random reads along a cyclic pointer chain,
  measuring latency per step (no two loads can overlap);
* ``random_writes``: independent 8-byte stores at LCG-generated
  positions, measuring random write cost;
* ``linear_read`` / ``linear_write``: multi-threaded sequential sweeps
  at 64-bit or 512-bit access width, measuring bandwidth.

The kernels use width-pinned memory operations (monotonic-atomic scalar
loads/stores, ``<8 x i64>`` vector ops) so the compiler can neither
elide, widen, nor re-vectorize the accesses; results therefore reflect
the stated instruction stream, as with hand-written assembly loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import lowlevel, prng, timing
from .errors import CapabilityError
from .parallel import WorkerTeam, chunk_bounds

# Knuth's MMIX linear congruential generator
LCG_MULTIPLIER = np.uint64(6364136223846793005)
LCG_INCREMENT = np.uint64(1442695040888963407)

WRITE_PATTERN = np.uint64(0x5A5A5A5A5A5A5A5A)

_SWEEP_TARGET_BYTES = 64 << 20  # per timed pass, amortizes dispatch overhead
_MIN_TIMED_NS = 200_000_000.0

WIDTHS = (64, 512)


@dataclass(frozen=True)
class MicrobenchResult:
    """One micro-benchmark measurement; metrics derive from the fields."""

    name: str
    op_count: int
    elapsed_ns: float
    bytes_touched: int
    checksum: int = 0

    @property
    def ns_per_op(self) -> float:
        return self.elapsed_ns / self.op_count if self.op_count else math.nan

    @property
    def gb_per_s(self) -> float:
        return self.bytes_touched / self.elapsed_ns if self.elapsed_ns else math.nan


@dataclass(frozen=True)
class ChainArray:
    """Slot i holds the index of the next slot; the links form one cycle
    visiting every slot exactly once (a random cyclic permutation)."""

    slots: np.ndarray

    @property
    def length(self) -> int:
        return len(self.slots)


def build_chain(slot_count: int, seed: int) -> ChainArray:
    if slot_count < 1:
        raise ValueError("chain needs at least one slot")
    p = prng.permutation(slot_count, seed)
    slots = np.empty(slot_count, dtype=np.uint64)
    slots[p] = np.roll(p, -1)
    return ChainArray(slots)


@njit(nogil=True, cache=True)
def _chase(slots, steps, start):
    idx = start
    for _ in range(steps):
        idx = np.intp(lowlevel.load_u64_scalar(slots, idx))
    return idx


def chase_chain(array_bytes: int, steps: int, seed: int) -> MicrobenchResult:
    """Mean latency of `steps` dependent loads over an array_bytes chain."""
    if array_bytes < 64 or array_bytes % 8:
        raise ValueError("array_bytes must be a multiple of 8, at least 64")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    n = array_bytes // 8
    chain = build_chain(n, seed)
    _chase(chain.slots, n, 0)  # untimed warm-up: one full cycle

    timer = timing.get_timer()
    t0 = timing.start(timer)
    final = _chase(chain.slots, steps, 0)
    elapsed = timing.elapsed_ns(timer, t0)
    return MicrobenchResult(
        name="chase_chain",
        op_count=steps,
        elapsed_ns=elapsed,
        bytes_touched=steps * 8,
        checksum=int(final),
    )


@njit(nogil=True, cache=True)
def _random_writes(arr, writes, x0, shift, mask):
    x = x0
    for _ in range(writes):
        x = x * LCG_MULTIPLIER + LCG_INCREMENT
        idx = np.intp((x >> shift) & mask)
        lowlevel.store_u64_scalar(arr, idx, x)
    return x


def random_writes(
    array_bytes: int, writes: int, seed: int, addr_mask: int | None = None
) -> MicrobenchResult:
    """`writes` 8-byte stores at LCG-chosen slots of a zeroed array.

    The slot count must be a power of two; the slot index is taken from
    the LCG's high bits (the low bits of a power-of-two-modulus LCG have
    short periods). `addr_mask`, a power of two minus one, optionally
    restricts the writes to the first addr_mask+1 slots.
    """
    n = array_bytes // 8
    if array_bytes < 8 or array_bytes % 8 or n & (n - 1):
        raise ValueError("array_bytes must be 8 * a power of two")
    if writes < 0:
        raise ValueError("writes must be >= 0")
    mask = np.uint64(n - 1)
    if addr_mask is not None:
        if addr_mask < 0 or addr_mask > n - 1 or (addr_mask & (addr_mask + 1)):
            raise ValueError("addr_mask must be a power of two minus one, < slots")
        mask = np.uint64(addr_mask)
    shift = np.uint64(64 - max(1, n.bit_length() - 1))

    arr = np.zeros(n, dtype=np.uint64)
    arr.fill(0)  # untimed warm-up: touch every page
    x0 = np.uint64(prng.mix64_int(seed))
    _random_writes(arr, 0, x0, shift, mask)  # compile outside the timed region

    timer = timing.get_timer()
    t0 = timing.start(timer)
    final = _random_writes(arr, writes, x0, shift, mask)
    elapsed = timing.elapsed_ns(timer, t0)
    return MicrobenchResult(
        name="random_writes",
        op_count=writes,
        elapsed_ns=elapsed,
        bytes_touched=writes * 8,
        checksum=int(final),
    )


@njit(nogil=True, cache=True)
def _read64(arr, lo, hi, reps):
    s = np.uint64(0)
    for _ in range(reps):
        for i in range(lo, hi):
            s += lowlevel.load_u64_scalar(arr, i)
    return s


@njit(nogil=True, cache=True)
def _read512(arr, lo, hi, reps, acc):
    for _ in range(reps):
        i = lo
        while i + 8 <= hi:
            lowlevel.load512_accum(arr, i, acc)
            i += 8


@njit(nogil=True, cache=True)
def _write64(arr, lo, hi, reps, value):
    for _ in range(reps):
        for i in range(lo, hi):
            lowlevel.store_u64_scalar(arr, i, value)


@njit(nogil=True, cache=True)
def _write512(arr, lo, hi, reps, pattern):
    for _ in range(reps):
        i = lo
        while i + 8 <= hi:
            lowlevel.store512(arr, i, pattern)
            i += 8


def _check_width(array_bytes: int, width: int, threads: int) -> None:
    if width not in WIDTHS:
        raise ValueError(f"width must be one of {WIDTHS}")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if width == 512 and not lowlevel.has_avx512():
        raise CapabilityError("512-bit kernels need avx512f, absent on this host")
    step = width // 8
    if array_bytes < step or array_bytes % step:
        raise ValueError(f"array_bytes must be a positive multiple of {step}")


def _sweep_loop(array_bytes, threads, sweep, reset=None) -> tuple[int, float]:
    """Run barrier-synced sweeps until 200 ms of timed work; returns
    (timed sweep count, elapsed ns). One untimed warm-up pass first."""
    reps = max(1, _SWEEP_TARGET_BYTES // array_bytes)
    timer = timing.get_timer()
    with WorkerTeam(threads) as team:
        team.run(lambda tid: sweep(tid, 1))  # untimed warm-up pass
        if reset is not None:
            reset()
        sweeps = 0
        t0 = timing.start(timer)
        while True:
            team.run(lambda tid: sweep(tid, reps))
            sweeps += reps
            elapsed = timing.elapsed_ns(timer, t0)
            if elapsed >= _MIN_TIMED_NS:
                return sweeps, elapsed


def linear_read(array_bytes: int, width: int, threads: int) -> MicrobenchResult:
    """Sequential-read bandwidth; every load lands in the checksum."""
    _check_width(array_bytes, width, threads)
    n = array_bytes // 8
    arr = np.arange(n, dtype=np.uint64)
    bounds = chunk_bounds(n, threads, align=8)
    sums = np.zeros(threads, dtype=np.uint64)
    accs = np.zeros((threads, 8), dtype=np.uint64)

    def sweep(tid, reps):
        lo, hi = bounds[tid]
        if width == 64:
            sums[tid] += _read64(arr, lo, hi, reps)
        else:
            _read512(arr, lo, hi, reps, accs[tid])

    def reset():
        sums.fill(0)
        accs.fill(0)

    sweeps, elapsed = _sweep_loop(array_bytes, threads, sweep, reset)
    total = int(np.add.reduce(sums) + np.add.reduce(accs, axis=None))
    return MicrobenchResult(
        name=f"linear_read_{width}",
        op_count=sweeps * array_bytes // (width // 8),
        elapsed_ns=elapsed,
        bytes_touched=sweeps * array_bytes,
        checksum=total,
    )


def linear_write(array_bytes: int, width: int, threads: int) -> MicrobenchResult:
    """Sequential-write bandwidth; the array is verified afterwards."""
    _check_width(array_bytes, width, threads)
    n = array_bytes // 8
    arr = np.zeros(n, dtype=np.uint64)
    bounds = chunk_bounds(n, threads, align=8)
    pattern = np.full(8, WRITE_PATTERN, dtype=np.uint64)

    def sweep(tid, reps):
        lo, hi = bounds[tid]
        if width == 64:
            _write64(arr, lo, hi, reps, WRITE_PATTERN)
        else:
            _write512(arr, lo, hi, reps, pattern)

    sweeps, elapsed = _sweep_loop(array_bytes, threads, sweep)
    if not (arr == WRITE_PATTERN).all():
        raise RuntimeError("write sweep left slots without the store pattern")
    return MicrobenchResult(
        name=f"linear_write_{width}",
        op_count=sweeps * array_bytes // (width // 8),
        elapsed_ns=elapsed,
        bytes_touched=sweeps * array_bytes,
        checksum=int(WRITE_PATTERN),
    )
