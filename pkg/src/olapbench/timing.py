"""Elapsed-time measurement for benchmark regions.

Regions are timed with the CPU cycle counter, read through a fenced
(serialized) intrinsic at the region boundaries and converted to
nanoseconds via a calibrated ticks-per-ns rate.  Hosts without a usable
cycle counter fall back to the monotonic wall clock; the active source is
carried in :class:`TimerInfo` and ends up in the result rows, so numbers
from the two sources are never silently mixed.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from numba import njit

from . import lowlevel


@njit(cache=True)
def _ticks():
    return lowlevel.readcycles()


@dataclass(frozen=True)
class TimerInfo:
    """Active time source: ``kind`` is "tsc" or "wallclock"."""

    kind: str
    ticks_per_ns: float

    def ticks_to_ns(self, ticks: int) -> float:
        if self.kind != "tsc":
            raise ValueError("tick conversion requires the tsc timer")
        return ticks / self.ticks_per_ns


def _rate_sample(window_ns: int) -> float:
    t0 = time.perf_counter_ns()
    c0 = _ticks()
    while time.perf_counter_ns() - t0 < window_ns:
        pass
    c1 = _ticks()
    t1 = time.perf_counter_ns()
    if c1 <= c0 or t1 <= t0:
        return 0.0
    return (c1 - c0) / (t1 - t0)


def calibrate(window_ns: int = 20_000_000) -> TimerInfo:
    """Measure the cycle counter rate against the wall clock.

    Three samples, median taken; any non-advancing sample disqualifies
    the counter and selects the wall-clock fallback.
    """
    _ticks()  # compile outside the measurement
    rates = [_rate_sample(window_ns) for _ in range(3)]
    if min(rates) <= 0.0:
        return TimerInfo("wallclock", 0.0)
    return TimerInfo("tsc", statistics.median(rates))


_cached: TimerInfo | None = None


def get_timer() -> TimerInfo:
    """Calibrated process-wide timer (calibration runs once, lazily)."""
    global _cached
    if _cached is None:
        _cached = calibrate()
    return _cached


def start(timer: TimerInfo) -> int:
    """Opaque region-start token; pass to :func:`elapsed_ns`."""
    if timer.kind == "tsc":
        return _ticks()
    return time.perf_counter_ns()


def elapsed_ns(timer: TimerInfo, token: int) -> float:
    """Nanoseconds since ``token`` was taken from :func:`start`."""
    if timer.kind == "tsc":
        return timer.ticks_to_ns(_ticks() - token)
    return float(time.perf_counter_ns() - token)
