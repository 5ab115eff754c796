"""Bundled figure definitions for the standard benchmark sweeps.

Each preset pins the configuration dimensions it does not plot, so one
combined CSV holding several sweeps renders cleanly. The filters
assume the sweep conventions of the golden battery: joins materialize
with two threads, the kernel sweep varies only the kernel column, and
so on; custom sweeps can pass their own spec as JSON instead.
"""

from __future__ import annotations

from .figspec import FigureSpec

_JOIN_PHASES = (
    "t_hist1_ns", "t_copy1_ns", "t_hist2_ns", "t_copy2_ns",
    "t_crack_ns", "t_build_ns", "t_probe_ns", "t_compact_ns",
)

_TUPLES_PER_S = 1e-6  # axis unit: millions per second
_NS_TO_MS = 1e-6

PRESETS: dict[str, FigureSpec] = {
    # join algorithm overview: one bar per algorithm
    "fig2": FigureSpec(
        kind="bars", x="algo", y="throughput", y_scale=_TUPLES_PER_S,
        where=(("experiment", "join"), ("kernel", "naive"),
               ("queue", "lockfree"), ("alloc", "prealloc_touch")),
        title="Join throughput by algorithm",
        xlabel="algorithm", ylabel="throughput [M tuples/s]",
    ),
    # per-phase runtime breakdown, one stacked bar per algorithm
    "fig5": FigureSpec(
        kind="stacked_bars", x="algo", stack=_JOIN_PHASES, y_scale=_NS_TO_MS,
        where=(("experiment", "join"), ("kernel", "naive"),
               ("queue", "lockfree"), ("alloc", "prealloc_touch")),
        title="Join phase breakdown",
        xlabel="time [ms]", ylabel="algorithm",
    ),
    # histogram/scatter kernel comparison across join algorithms
    "fig7": FigureSpec(
        kind="bars", x="kernel", series="algo", y="throughput",
        y_scale=_TUPLES_PER_S,
        where=(("experiment", "join"), ("queue", "lockfree"),
               ("alloc", "prealloc_touch")),
        title="Partitioning kernel impact",
        xlabel="kernel variant", ylabel="throughput [M tuples/s]",
    ),
    # task queue comparison under the partitioned join
    "fig9": FigureSpec(
        kind="bars", x="queue", y="throughput", y_scale=_TUPLES_PER_S,
        where=(("experiment", "join"), ("algo", "rho"),
               ("kernel", "naive"), ("alloc", "prealloc_touch")),
        title="Task queue comparison",
        xlabel="queue", ylabel="throughput [M tuples/s]",
    ),
    # pre-touched vs lazily faulted buffers
    "fig10": FigureSpec(
        kind="bars", x="alloc", y="throughput", y_scale=_TUPLES_PER_S,
        where=(("experiment", "join"), ("algo", "rho"),
               ("kernel", "naive"), ("queue", "lockfree")),
        title="Allocation mode comparison",
        xlabel="allocation mode", ylabel="throughput [M tuples/s]",
    ),
    # scan thread scaling
    "fig12": FigureSpec(
        kind="lines", x="threads", y="throughput", y_scale=_TUPLES_PER_S,
        where=(("experiment", "scan"),),
        title="Scan scale-up",
        xlabel="threads", ylabel="throughput [M rows/s]",
    ),
    # per-query runtimes with error bars
    "fig16": FigureSpec(
        kind="bars", x="query", y="elapsed_ns", y_scale=_NS_TO_MS,
        error="elapsed_ns",
        where=(("experiment", "query"),),
        title="Query runtimes",
        xlabel="query", ylabel="runtime [ms]",
    ),
}


def get_preset(name: str) -> FigureSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}, available: {', '.join(sorted(PRESETS))}"
        ) from None
