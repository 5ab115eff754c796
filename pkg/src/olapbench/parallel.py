"""Fork-join worker teams and chunk splitting for data-parallel phases.

The compiled kernels release the GIL, so plain OS threads give real
parallelism; a WorkerTeam keeps one set of threads alive across phases
and replays them through barrier-separated work functions.
"""

from __future__ import annotations

import threading


class WorkerTeam:
    """A fixed team of worker threads driven phase by phase.

    ``run(fn)`` executes ``fn(tid)`` on every worker (tid 0..threads-1)
    and returns when all are done; the first worker exception is
    re-raised on the calling thread. Teams are context managers and must
    be closed so the threads exit.
    """

    def __init__(self, threads: int):
        if threads < 1:
            raise ValueError("team needs at least one thread")
        self.threads = threads
        self._go = threading.Barrier(threads + 1)
        self._done = threading.Barrier(threads + 1)
        self._fn = None
        self._errors: list[BaseException] = []
        self._stop = False
        self._workers = [
            threading.Thread(target=self._loop, args=(t,), daemon=True)
            for t in range(threads)
        ]
        for w in self._workers:
            w.start()

    def _loop(self, tid: int) -> None:
        while True:
            self._go.wait()
            if self._stop:
                return
            try:
                self._fn(tid)
            except BaseException as e:  # surfaced by run()
                self._errors.append(e)
            self._done.wait()

    def run(self, fn) -> None:
        if self._stop:
            raise RuntimeError("team is closed")
        self._fn = fn
        self._go.wait()
        self._done.wait()
        self._fn = None
        if self._errors:
            first = self._errors[0]
            self._errors.clear()
            raise first

    def close(self) -> None:
        if self._stop:
            return
        self._stop = True
        self._go.wait()
        for w in self._workers:
            w.join()

    def __enter__(self) -> "WorkerTeam":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def chunk_bounds(n: int, parts: int, align: int = 1) -> list[tuple[int, int]]:
    """Split 0..n into `parts` contiguous ranges.

    Every boundary except the final one is a multiple of `align`;
    ranges may be empty when n is small.
    """
    if parts < 1 or align < 1:
        raise ValueError("parts and align must be >= 1")
    cuts = [n * i // parts // align * align for i in range(parts)]
    cuts.append(n)
    return [(cuts[i], cuts[i + 1]) for i in range(parts)]
