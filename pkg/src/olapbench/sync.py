"""Work-distribution primitives with contrasting blocking behavior.

Two multi-producer/multi-consumer task queues expose the same push/pop
API so benchmarks can A/B them:

* :class:`LockFreeQueue` never makes a blocking call on any path: a
  bounded ring of power-of-two capacity with per-slot sequence numbers.
  Each ring generation is claimed through a one-shot ticket
  (``dict.setdefault`` on the generation number, a single atomic
  operation under CPython), and a post-win recheck of the slot sequence
  rejects stale claims. No thread ever holds a lock across an
  operation, so a descheduled thread cannot block the others' progress.
* :class:`MutexQueue` takes the platform's blocking mutex around every
  operation (with condition signaling for the optional waiting pop); a
  descheduled lock holder stalls everyone else, which is exactly the
  behavior the lock-free variant exists to avoid.

:class:`SpinLatch` is the byte-wide test-and-set latch the hash joins
use for shared-bucket protection, wrapped for Python-level use.
"""

from __future__ import annotations

import threading
import time
from collections import deque

import numpy as np
from numba import njit

from . import lowlevel, timing
from .microbench import MicrobenchResult

QUEUE_KINDS = ("lockfree", "mutex")


class LockFreeQueue:
    """Bounded MPMC FIFO ring; pop returns None instead of blocking."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        # power-of-two ring, at least 2 so publish (pos+1) and slot reuse
        # (pos+capacity) are distinct sequence values
        cap = 1 << max(1, (capacity - 1).bit_length())
        self.capacity = cap
        self._mask = cap - 1
        self._slots = [None] * cap
        self._seq = list(range(cap))
        self._epos = 0  # advisory frontier hints, exactness lives in the tickets
        self._dpos = 0
        self._eclaims: dict[int, object] = {}
        self._dclaims: dict[int, object] = {}

    def push(self, task) -> bool:
        """False when the ring is full; the task was then not enqueued."""
        seq, mask = self._seq, self._mask
        pos = self._epos
        while True:
            i = pos & mask
            s = seq[i]
            if s == pos:
                ticket = object()
                if self._eclaims.setdefault(pos, ticket) is ticket:
                    if seq[i] != pos:  # stale claim on a recycled generation
                        self._eclaims.pop(pos, None)
                        pos = max(self._epos, pos + 1)
                        continue
                    self._slots[i] = task
                    seq[i] = pos + 1  # publish
                    self._epos = pos + 1
                    self._eclaims.pop(pos, None)
                    return True
                pos = max(self._epos, pos + 1)
            elif s < pos:
                return False  # previous generation still unconsumed: full
            else:
                pos += 1  # generation already published, scan forward


    def pop(self):
        """A previously pushed task, or None when the queue is empty."""
        seq, mask, cap = self._seq, self._mask, self.capacity
        pos = self._dpos
        while True:
            i = pos & mask
            s = seq[i]
            if s == pos + 1:
                ticket = object()
                if self._dclaims.setdefault(pos, ticket) is ticket:
                    if seq[i] != pos + 1:  # stale claim on a recycled generation
                        self._dclaims.pop(pos, None)
                        pos = max(self._dpos, pos + 1)
                        continue
                    task = self._slots[i]
                    self._slots[i] = None
                    seq[i] = pos + cap  # free the slot for the next lap
                    self._dpos = pos + 1
                    self._dclaims.pop(pos, None)
                    return task
                pos = max(self._dpos, pos + 1)
            elif s < pos + 1:
                return None  # nothing published at the frontier: empty
            else:
                pos += 1  # generation already consumed, scan forward


class MutexQueue:
    """Blocking-mutex FIFO; same push/pop contract as LockFreeQueue."""

    def __init__(self, capacity: int | None = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be >= 1 (or None for unbounded)")
        self.capacity = capacity
        self._items: deque = deque()
        self._lock = threading.Lock()
        self._nonempty = threading.Condition(self._lock)

    def push(self, task) -> bool:
        with self._nonempty:
            if self.capacity is not None and len(self._items) >= self.capacity:
                return False
            self._items.append(task)
            self._nonempty.notify()
            return True

    def pop(self):
        with self._lock:
            return self._items.popleft() if self._items else None

    def pop_wait(self, timeout: float | None = None):
        """Blocking pop: sleeps on the condition until a task arrives."""
        with self._nonempty:
            if self._nonempty.wait_for(lambda: bool(self._items), timeout):
                return self._items.popleft()
            return None


def make_queue(kind: str, capacity: int):
    if kind == "lockfree":
        return LockFreeQueue(capacity)
    if kind == "mutex":
        return MutexQueue(capacity)
    raise ValueError(f"unknown queue kind {kind!r}, expected one of {QUEUE_KINDS}")


@njit(nogil=True, cache=True)
def _latch_try(cell):
    return lowlevel.atomic_xchg_u8(cell, 0, np.uint8(1)) == 0


@njit(nogil=True, cache=True)
def _latch_release(cell):
    lowlevel.atomic_release_u8(cell, 0, np.uint8(0))


class SpinLatch:
    """Test-and-set byte latch; spins, never sleeps."""

    def __init__(self):
        self._cell = np.zeros(1, dtype=np.uint8)
        _latch_try(self._cell)  # compile before first contended use
        _latch_release(self._cell)

    def acquire(self) -> None:
        while not _latch_try(self._cell):
            pass

    def release(self) -> None:
        _latch_release(self._cell)

    def __enter__(self) -> "SpinLatch":
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()


def contention_bench(
    queue_kind: str, threads: int, tasks: int, task_cost_ns: int = 0
) -> MicrobenchResult:
    """Drain `tasks` pre-filled tasks with `threads` consumers.

    Every consumed task id marks a flag-array cell; the run aborts if
    any task is lost or consumed twice. With near-zero task cost the
    consumers hammer the queue back to back, the forced-contention
    setting of the queue comparison.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if tasks < threads:
        raise ValueError("need at least one task per thread")

    q = make_queue(queue_kind, capacity=tasks)
    for t in range(tasks):
        if not q.push(t):
            raise RuntimeError("queue refused a task within its capacity")
    flags = np.zeros(tasks, dtype=np.uint32)
    barrier = threading.Barrier(threads + 1)
    errors: list[BaseException] = []

    def consume():
        try:
            barrier.wait()
            while True:
                t = q.pop()
                if t is None:
                    return
                flags[t] += 1
                if task_cost_ns:
                    end = time.perf_counter_ns() + task_cost_ns
                    while time.perf_counter_ns() < end:
                        pass
        except BaseException as e:
            errors.append(e)

    workers = [threading.Thread(target=consume, daemon=True) for _ in range(threads)]
    for w in workers:
        w.start()
    timer = timing.get_timer()
    barrier.wait()
    t0 = timing.start(timer)
    for w in workers:
        w.join()
    elapsed = timing.elapsed_ns(timer, t0)

    if errors:
        raise errors[0]
    consumed = int(flags.sum())
    if consumed != tasks or int(flags.max()) != 1:
        raise RuntimeError(
            f"exactly-once violated: {consumed} consumptions of {tasks} tasks, "
            f"max per task {int(flags.max())}"
        )
    return MicrobenchResult(
        name=f"queue_{queue_kind}",
        op_count=tasks,
        elapsed_ns=elapsed,
        bytes_touched=0,
        checksum=consumed,
    )
