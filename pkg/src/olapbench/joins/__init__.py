"""Multi-threaded in-memory equi-joins over 8-byte tuples.

Three strategies share one result shape:

* ``pht_join``: a single bucket-chained hash table over the whole
  build side, built in parallel under per-bucket spin latches and
  probed without synchronization;
* ``rho_join``: two radix-partitioning passes over both inputs
  (histogram + scatter each) down to cache-sized partitions, then a
  build-and-probe task per partition pair; pass 2 and the join tasks
  are distributed over a work queue;
* ``crk_join``: recursive in-place bit cracking of private copies of
  both inputs to the same partition granularity, then the identical
  build-and-probe wave.

Keys are 32-bit. When materializing, the build side must be
key-unique (a primary key): output regions are sized on the
at-most-one-match-per-probe-tuple guarantee. Output row order is
unspecified and may differ between strategies and thread counts.

``JoinOptions.kernel_variant`` switches the partitioning loop shapes
(histogram, scatter, chain build) of the radix and cracking joins;
``pht_join`` has no digit loops and ignores it.
"""

from __future__ import annotations

import mmap
import resource
from dataclasses import dataclass, field

import numpy as np

from .. import timing
from ..datagen import Relation
from ..errors import ConfigError
from ..parallel import WorkerTeam, chunk_bounds
from ..sync import QUEUE_KINDS, make_queue
from . import kernels
from .partition import (
    Histogram,
    PartitionedRelation,
    compute_histogram,
    crack_partition,
    radix_partition,
    thread_bases,
)

__all__ = [
    "ALLOCATION_MODES",
    "Histogram",
    "JoinOptions",
    "JoinResult",
    "KERNEL_VARIANTS",
    "OUT_DTYPE",
    "PartitionedRelation",
    "compute_histogram",
    "crack_partition",
    "crk_join",
    "pht_join",
    "radix_partition",
    "rho_join",
]

KERNEL_VARIANTS = kernels.VARIANTS
ALLOCATION_MODES = ("prealloc_touch", "lazy")

OUT_DTYPE = np.dtype([("key", "<u4"), ("left", "<u4"), ("right", "<u4")])

_EMPTY_OUT2D = np.empty((0, 3), dtype=np.uint32)


@dataclass(frozen=True)
class JoinOptions:
    """Execution knobs shared by all join strategies.

    allocation_mode "prealloc_touch" page-touches output and
    intermediate buffers before the timed phases; "lazy" leaves them
    untouched so first-touch faults land inside the phases."""

    threads: int = 1
    radix_bits_pass1: int = 7
    radix_bits_pass2: int = 7
    kernel_variant: str = "naive"
    queue_kind: str = "lockfree"
    materialize: bool = False
    allocation_mode: str = "prealloc_touch"

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.radix_bits_pass1 < 0 or self.radix_bits_pass2 < 0:
            raise ValueError("radix bits must be >= 0")
        if self.radix_bits_pass1 + self.radix_bits_pass2 > 27:
            raise ValueError("radix_bits_pass1 + radix_bits_pass2 must be <= 27")
        if self.kernel_variant not in KERNEL_VARIANTS:
            raise ValueError(f"kernel_variant must be one of {KERNEL_VARIANTS}")
        if self.queue_kind not in QUEUE_KINDS:
            raise ValueError(f"queue_kind must be one of {QUEUE_KINDS}")
        if self.allocation_mode not in ALLOCATION_MODES:
            raise ValueError(f"allocation_mode must be one of {ALLOCATION_MODES}")


@dataclass(frozen=True)
class JoinResult:
    """match_count plus per-phase wall times (ns). `output` holds the
    materialized (key, left, right) rows, or None when counting only.
    elapsed_ns spans all phases including coordination between them;
    minor_faults counts the process page faults inside that span, the
    observable difference between the allocation modes."""

    match_count: int
    output: np.ndarray | None
    phase_times: dict[str, float] = field(default_factory=dict)
    elapsed_ns: float = 0.0
    minor_faults: int = 0


def _minflt() -> int:
    return resource.getrusage(resource.RUSAGE_SELF).ru_minflt


def _alloc(shape, dtype, touch):
    """Fresh zeroed buffer over its own anonymous mapping.

    A private mapping (small pages forced) keeps first-touch faults at
    page granularity and out of reach of allocator reuse, so the two
    allocation modes stay distinguishable by the fault counter: touched
    buffers fault here, untouched ones inside the timed phases."""
    dtype = np.dtype(dtype)
    count = 1
    for extent in shape if isinstance(shape, tuple) else (shape,):
        count *= int(extent)
    if count == 0:
        return np.empty(shape, dtype=dtype)
    mm = mmap.mmap(-1, count * dtype.itemsize)
    if hasattr(mmap, "MADV_NOHUGEPAGE"):
        try:
            mm.madvise(mmap.MADV_NOHUGEPAGE)
        except OSError:
            pass
    arr = np.frombuffer(mm, dtype=dtype, count=count).reshape(shape)
    if touch:
        flat = arr.reshape(-1).view(np.uint8)
        flat[::4096] = 0
        flat[-1] = 0
    return arr


# anonymous mappings start zeroed, so only the name differs
_zeros = _alloc


def _phase(timer, fn):
    t0 = timing.start(timer)
    result = fn()
    return result, timing.elapsed_ns(timer, t0)


def _split_wall(wall, build_ticks, probe_ticks):
    """Apportion a wave's wall time to build/probe by tick share."""
    total = build_ticks + probe_ticks
    if total <= 0:
        return wall / 2, wall / 2
    return wall * build_ticks / total, wall * probe_ticks / total


def _mask_shift(radix_bits, shift):
    return np.uint64(((1 << radix_bits) - 1) << shift), np.uint64(shift)


def _check_partition_budget(build, opts):
    total = 1 << (opts.radix_bits_pass1 + opts.radix_bits_pass2)
    if total > build.cardinality:
        raise ConfigError(
            f"{total} partitions exceed the build cardinality "
            f"{build.cardinality}; lower the radix bits"
        )


def _fill_queue(queue, items):
    for item in items:
        if not queue.push(item):
            raise RuntimeError("task queue rejected a task")


def _wave_scratch(offs_build, threads):
    """Per-thread chain scratch sized for the largest build partition."""
    sizes = np.diff(offs_build.astype(np.int64))
    max_part = int(sizes.max()) if len(sizes) else 0
    buckets = kernels.next_pow2(max(1, max_part))
    heads = [np.empty(buckets, np.int64) for _ in range(threads)]
    nexts = [np.empty(max(1, max_part), np.int64) for _ in range(threads)]
    return heads, nexts


def _join_wave(team, queue, opts, rowsb, offsb, rowsp, offsp, groups,
               group_size, heads, nexts, out2d):
    """Run one build-and-probe task per partition group; group g covers
    partition pairs [g*group_size, (g+1)*group_size). Materialized rows
    land at the probe-region start of each group, compacted later."""
    hshift = np.uint64(opts.radix_bits_pass1 + opts.radix_bits_pass2)
    variant = kernels.VARIANT_IDS[opts.kernel_variant]
    matches = np.zeros(opts.threads, np.int64)
    build_ticks = np.zeros(opts.threads, np.float64)
    probe_ticks = np.zeros(opts.threads, np.float64)
    mat_counts = np.zeros(max(1, groups), np.int64)

    def worker(tid):
        while True:
            g = queue.pop()
            if g is None:
                return
            f_lo = g * group_size
            start = int(offsp[f_lo])
            m, cur, bt, pt = kernels.join_partitions(
                rowsb, offsb, rowsp, offsp, f_lo, f_lo + group_size,
                hshift, variant, heads[tid], nexts[tid], out2d, start,
                opts.materialize,
            )
            matches[tid] += m
            mat_counts[g] = cur - start
            build_ticks[tid] += float(bt)
            probe_ticks[tid] += float(pt)

    _fill_queue(queue, range(groups))
    team.run(worker)
    return (
        int(matches.sum()),
        mat_counts,
        float(build_ticks.sum()),
        float(probe_ticks.sum()),
    )


def _compact_groups(out2d, region_starts, mat_counts, total):
    """Concatenate the per-region match prefixes into one dense array."""
    view = np.empty(total, OUT_DTYPE)
    flat = view.view(np.uint32).reshape(total, 3)
    pos = 0
    for start, count in zip(region_starts, mat_counts):
        c = int(count)
        s = int(start)
        flat[pos : pos + c] = out2d[s : s + c]
        pos += c
    return view


def pht_join(
    build: Relation, probe: Relation, options: JoinOptions | None = None
) -> JoinResult:
    """Join via one shared bucket-chain table (phases: build, probe)."""
    opts = options if options is not None else JoinOptions()
    touch = opts.allocation_mode == "prealloc_touch"
    timer = timing.get_timer()
    rowsb, rowsp = build.as_u64(), probe.as_u64()
    buckets = kernels.next_pow2(max(1, len(rowsb)))
    hmask = np.uint64(buckets - 1)
    heads = np.full(buckets, -1, dtype=np.int64)  # init implies touching
    nexts = _alloc(max(1, len(rowsb)), np.int64, touch)
    latches = _zeros(buckets, np.uint8, touch)
    out2d = _alloc((len(rowsp), 3), np.uint32, touch) if opts.materialize else _EMPTY_OUT2D
    bounds_b = chunk_bounds(len(rowsb), opts.threads)
    bounds_p = chunk_bounds(len(rowsp), opts.threads)
    matches = np.zeros(opts.threads, np.int64)
    cursors = np.zeros(opts.threads, np.int64)
    phase_times = {}

    with WorkerTeam(opts.threads) as team:
        f0 = _minflt()
        t_all = timing.start(timer)

        def build_chunk(tid):
            lo, hi = bounds_b[tid]
            kernels.pht_build(rowsb, lo, hi, hmask, heads, nexts, latches)

        _, phase_times["build"] = _phase(timer, lambda: team.run(build_chunk))

        def probe_chunk(tid):
            lo, hi = bounds_p[tid]
            if opts.materialize:
                m, cur = kernels.pht_probe_mat(
                    rowsb, rowsp, lo, hi, hmask, heads, nexts, out2d, lo
                )
                cursors[tid] = cur
            else:
                m = kernels.pht_probe_count(
                    rowsb, rowsp, lo, hi, hmask, heads, nexts
                )
            matches[tid] = m

        _, phase_times["probe"] = _phase(timer, lambda: team.run(probe_chunk))

        match_count = int(matches.sum())
        output = None
        if opts.materialize:
            starts = [bounds_p[t][0] for t in range(opts.threads)]
            counts = [int(cursors[t]) - bounds_p[t][0] for t in range(opts.threads)]
            output, phase_times["compact"] = _phase(
                timer, lambda: _compact_groups(out2d, starts, counts, match_count)
            )
        elapsed = timing.elapsed_ns(timer, t_all)
        faults = _minflt() - f0
    return JoinResult(match_count, output, phase_times, elapsed, faults)


def rho_join(
    build: Relation, probe: Relation, options: JoinOptions | None = None
) -> JoinResult:
    """Two-pass radix join (phases: hist1, copy1, hist2, copy2, build,
    probe). Pass 1 runs in barrier-synced chunk phases; pass 2 and the
    partition joins run as queued tasks, one per pass-1 partition."""
    opts = options if options is not None else JoinOptions()
    _check_partition_budget(build, opts)
    touch = opts.allocation_mode == "prealloc_touch"
    timer = timing.get_timer()
    b1, b2 = opts.radix_bits_pass1, opts.radix_bits_pass2
    p1, p2 = 1 << b1, 1 << b2
    mask1, shift1 = _mask_shift(b1, 0)
    mask2, shift2 = _mask_shift(b2, b1)
    hist_kernel = kernels.HIST_KERNELS[opts.kernel_variant]
    scatter_kernel = kernels.SCATTER_KERNELS[opts.kernel_variant]
    rowsb, rowsp = build.as_u64(), probe.as_u64()
    threads = opts.threads

    outb1 = _alloc(len(rowsb), np.uint64, touch)
    outp1 = _alloc(len(rowsp), np.uint64, touch)
    outb2 = _alloc(len(rowsb), np.uint64, touch)
    outp2 = _alloc(len(rowsp), np.uint64, touch)
    out2d = _alloc((len(rowsp), 3), np.uint32, touch) if opts.materialize else _EMPTY_OUT2D
    hist_b1 = np.zeros((threads, p1), np.uint64)
    hist_p1 = np.zeros((threads, p1), np.uint64)
    hist_b2 = np.zeros((p1, p2), np.uint64)
    hist_p2 = np.zeros((p1, p2), np.uint64)
    bounds_b = chunk_bounds(len(rowsb), threads)
    bounds_p = chunk_bounds(len(rowsp), threads)
    queue = make_queue(opts.queue_kind, max(2, p1))
    phase_times = {}

    with WorkerTeam(threads) as team:
        f0 = _minflt()
        t_all = timing.start(timer)

        def hist1_chunk(tid):
            lo, hi = bounds_b[tid]
            hist_kernel(rowsb, lo, hi, mask1, shift1, hist_b1[tid])
            lo, hi = bounds_p[tid]
            hist_kernel(rowsp, lo, hi, mask1, shift1, hist_p1[tid])

        _, phase_times["hist1"] = _phase(timer, lambda: team.run(hist1_chunk))

        def copy1():
            offs_b1, bases_b = thread_bases(hist_b1)
            offs_p1, bases_p = thread_bases(hist_p1)

            def chunk(tid):
                lo, hi = bounds_b[tid]
                scatter_kernel(rowsb, lo, hi, mask1, shift1, bases_b[tid], outb1)
                lo, hi = bounds_p[tid]
                scatter_kernel(rowsp, lo, hi, mask1, shift1, bases_p[tid], outp1)

            team.run(chunk)
            return offs_b1, offs_p1

        (offs_b1, offs_p1), phase_times["copy1"] = _phase(timer, copy1)

        def hist2():
            def worker(tid):
                while True:
                    p = queue.pop()
                    if p is None:
                        return
                    hist_kernel(outb1, int(offs_b1[p]), int(offs_b1[p + 1]),
                                mask2, shift2, hist_b2[p])
                    hist_kernel(outp1, int(offs_p1[p]), int(offs_p1[p + 1]),
                                mask2, shift2, hist_p2[p])

            _fill_queue(queue, range(p1))
            team.run(worker)

        _, phase_times["hist2"] = _phase(timer, hist2)

        def copy2():
            offs_bf = np.zeros(p1 * p2 + 1, np.uint64)
            np.cumsum(hist_b2.reshape(-1), out=offs_bf[1:])
            offs_pf = np.zeros(p1 * p2 + 1, np.uint64)
            np.cumsum(hist_p2.reshape(-1), out=offs_pf[1:])

            def worker(tid):
                while True:
                    p = queue.pop()
                    if p is None:
                        return
                    dests = offs_bf[p * p2 : (p + 1) * p2].copy()
                    scatter_kernel(outb1, int(offs_b1[p]), int(offs_b1[p + 1]),
                                   mask2, shift2, dests, outb2)
                    dests = offs_pf[p * p2 : (p + 1) * p2].copy()
                    scatter_kernel(outp1, int(offs_p1[p]), int(offs_p1[p + 1]),
                                   mask2, shift2, dests, outp2)

            _fill_queue(queue, range(p1))
            team.run(worker)
            return offs_bf, offs_pf

        (offs_bf, offs_pf), phase_times["copy2"] = _phase(timer, copy2)

        heads, nexts = _wave_scratch(offs_bf, threads)
        (match_count, mat_counts, bticks, pticks), wave_wall = _phase(
            timer,
            lambda: _join_wave(team, queue, opts, outb2, offs_bf, outp2,
                               offs_pf, p1, p2, heads, nexts, out2d),
        )
        phase_times["build"], phase_times["probe"] = _split_wall(
            wave_wall, bticks, pticks
        )

        output = None
        if opts.materialize:
            starts = [int(offs_pf[g * p2]) for g in range(p1)]
            output, phase_times["compact"] = _phase(
                timer,
                lambda: _compact_groups(out2d, starts, mat_counts, match_count),
            )
        elapsed = timing.elapsed_ns(timer, t_all)
        faults = _minflt() - f0
    return JoinResult(match_count, output, phase_times, elapsed, faults)


def crk_join(
    build: Relation, probe: Relation, options: JoinOptions | None = None
) -> JoinResult:
    """Cracking join (phases: crack, build, probe). Both inputs are
    copied, then cracked in place bit by bit, most significant digit
    bit first, to the rho_join partition granularity; the partition
    joins reuse its task wave. The copies keep the caller's relations
    intact and are made before the timed phases."""
    opts = options if options is not None else JoinOptions()
    _check_partition_budget(build, opts)
    touch = opts.allocation_mode == "prealloc_touch"
    timer = timing.get_timer()
    depth = opts.radix_bits_pass1 + opts.radix_bits_pass2
    p1, p2 = 1 << opts.radix_bits_pass1, 1 << opts.radix_bits_pass2
    rowsb = build.as_u64().copy()
    rowsp = probe.as_u64().copy()
    out2d = _alloc((len(rowsp), 3), np.uint32, touch) if opts.materialize else _EMPTY_OUT2D
    queue = make_queue(opts.queue_kind, max(2, p1 * p2))
    phase_times = {}

    with WorkerTeam(opts.threads) as team:
        f0 = _minflt()
        t_all = timing.start(timer)

        def crack_all():
            bounds_b = np.array([0, len(rowsb)], np.int64)
            bounds_p = np.array([0, len(rowsp)], np.int64)
            for level in range(depth):
                bit = np.uint64(depth - 1 - level)
                segments = len(bounds_b) - 1
                splits_b = np.zeros(segments, np.int64)
                splits_p = np.zeros(segments, np.int64)

                def worker(tid):
                    while True:
                        task = queue.pop()
                        if task is None:
                            return
                        side, k = task
                        if side == 0:
                            splits_b[k] = kernels.crack(
                                rowsb, int(bounds_b[k]), int(bounds_b[k + 1]), bit
                            )
                        else:
                            splits_p[k] = kernels.crack(
                                rowsp, int(bounds_p[k]), int(bounds_p[k + 1]), bit
                            )

                _fill_queue(
                    queue, [(s, k) for k in range(segments) for s in (0, 1)]
                )
                team.run(worker)
                bounds_b = _interleave(bounds_b, splits_b)
                bounds_p = _interleave(bounds_p, splits_p)
            return bounds_b.astype(np.uint64), bounds_p.astype(np.uint64)

        (offs_bf, offs_pf), phase_times["crack"] = _phase(timer, crack_all)

        heads, nexts = _wave_scratch(offs_bf, opts.threads)
        (match_count, mat_counts, bticks, pticks), wave_wall = _phase(
            timer,
            lambda: _join_wave(team, queue, opts, rowsb, offs_bf, rowsp,
                               offs_pf, p1, p2, heads, nexts, out2d),
        )
        phase_times["build"], phase_times["probe"] = _split_wall(
            wave_wall, bticks, pticks
        )

        output = None
        if opts.materialize:
            starts = [int(offs_pf[g * p2]) for g in range(p1)]
            output, phase_times["compact"] = _phase(
                timer,
                lambda: _compact_groups(out2d, starts, mat_counts, match_count),
            )
        elapsed = timing.elapsed_ns(timer, t_all)
        faults = _minflt() - f0
    return JoinResult(match_count, output, phase_times, elapsed, faults)


def _interleave(bounds, splits):
    new = np.empty(2 * len(splits) + 1, np.int64)
    new[0::2] = bounds
    new[1::2] = splits
    return new
