"""CPU topology discovery and benchmark thread placement.

Placement binds the process to distinct physical cores through the
scheduler affinity API, one core per worker thread, so SMT siblings
never share a benchmark. The remote and interleave placements split
data and compute across memory nodes: data-side pages are first-touched
while bound to the data node, compute then runs on another node (or
round-robin over all of them, with interleaved memory policy). Both
need at least two nodes and fail fast on a single-node host instead of
silently running local.
"""

from __future__ import annotations

import ctypes
import os
import platform
from dataclasses import dataclass

from .errors import PlacementError

PLACEMENTS = ("none", "local", "remote", "interleave")

_CPU_SYS = "/sys/devices/system/cpu"
_NODE_SYS = "/sys/devices/system/node"

_MPOL_DEFAULT = 0
_MPOL_INTERLEAVE = 3
_SET_MEMPOLICY_NR = {"x86_64": 238, "aarch64": 237}


def parse_cpulist(text: str) -> list[int]:
    """Kernel cpulist syntax: "0-3,8,10-11" -> [0, 1, 2, 3, 8, 10, 11]."""
    cpus: list[int] = []
    for part in text.strip().split(","):
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        cpus.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return cpus


def _read(path: str) -> str | None:
    try:
        with open(path) as f:
            return f.read()
    except OSError:
        return None


@dataclass(frozen=True)
class Topology:
    """Per-node cpu lists and the first-sibling cpu of each physical core."""

    node_cpus: dict[int, tuple[int, ...]]
    node_cores: dict[int, tuple[int, ...]]  # one cpu per physical core

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.node_cpus))

    def describe(self) -> str:
        lines = []
        for node in self.nodes:
            cores = self.node_cores[node]
            lines.append(f"node {node}: {len(cores)} physical cores, cpus {cores}")
        return "; ".join(lines)


def detect_topology() -> Topology:
    """Topology of the cpus this process may run on, from /sys."""
    allowed = sorted(os.sched_getaffinity(0))

    node_cpus: dict[int, list[int]] = {}
    if os.path.isdir(_NODE_SYS):
        for entry in os.listdir(_NODE_SYS):
            if not (entry.startswith("node") and entry[4:].isdigit()):
                continue
            listed = _read(os.path.join(_NODE_SYS, entry, "cpulist"))
            if listed is None:
                continue
            cpus = [c for c in parse_cpulist(listed) if c in set(allowed)]
            if cpus:
                node_cpus[int(entry[4:])] = cpus
    if not node_cpus:
        node_cpus = {0: allowed}

    node_cores: dict[int, tuple[int, ...]] = {}
    for node, cpus in node_cpus.items():
        first_of_core: dict[tuple[int, int], int] = {}
        for cpu in cpus:
            base = f"{_CPU_SYS}/cpu{cpu}/topology"
            pkg = _read(f"{base}/physical_package_id")
            core = _read(f"{base}/core_id")
            # no topology files (stripped container): every cpu is its own core
            key = (int(pkg), int(core)) if pkg and core else (0, cpu)
            first_of_core.setdefault(key, cpu)
        node_cores[node] = tuple(sorted(first_of_core.values()))

    return Topology(
        node_cpus={n: tuple(c) for n, c in node_cpus.items()},
        node_cores=node_cores,
    )


@dataclass(frozen=True)
class PlacementReport:
    """Resolved placement: where data is first-touched and compute runs."""

    placement: str
    data_cpus: tuple[int, ...]
    compute_cpus: tuple[int, ...]
    data_node: int | None
    compute_nodes: tuple[int, ...]


def plan_placement(placement: str, threads: int) -> PlacementReport:
    """Resolve a placement against the host, without binding anything.

    Raises PlacementError when the host cannot satisfy it: not enough
    physical cores on the chosen node, or a cross-node placement on a
    single-node machine.
    """
    if placement not in PLACEMENTS:
        raise ValueError(f"placement must be one of {PLACEMENTS}, got {placement!r}")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if placement == "none":
        return PlacementReport("none", (), (), None, ())

    topo = detect_topology()
    nodes = topo.nodes

    def take_cores(node: int) -> tuple[int, ...]:
        cores = topo.node_cores[node]
        if threads > len(cores):
            raise PlacementError(
                f"{threads} threads need {threads} physical cores on node "
                f"{node}, host has: {topo.describe()}"
            )
        return cores[:threads]

    if placement == "local":
        node = nodes[0]
        cores = take_cores(node)
        return PlacementReport("local", cores, cores, node, (node,))

    if len(nodes) < 2:
        raise PlacementError(
            f"placement {placement!r} needs at least two memory nodes, "
            f"host has: {topo.describe()}"
        )

    if placement == "remote":
        data_node, compute_node = nodes[0], nodes[-1]
        return PlacementReport(
            "remote",
            topo.node_cores[data_node][:1],
            take_cores(compute_node),
            data_node,
            (compute_node,),
        )

    # interleave: compute round-robin over nodes, memory policy striped
    pool = [list(topo.node_cores[n]) for n in nodes]
    picked: list[int] = []
    while len(picked) < threads:
        progressed = False
        for cores in pool:
            if cores:
                picked.append(cores.pop(0))
                progressed = True
                if len(picked) == threads:
                    break
        if not progressed:
            raise PlacementError(
                f"{threads} threads exceed the physical cores of the host: "
                f"{topo.describe()}"
            )
    return PlacementReport("interleave", (), tuple(picked), None, nodes)


def _set_mempolicy(mode: int, nodes: tuple[int, ...]) -> None:
    nr = _SET_MEMPOLICY_NR.get(platform.machine())
    if nr is None:
        raise PlacementError(
            f"no set_mempolicy syscall number known for {platform.machine()}"
        )
    libc = ctypes.CDLL(None, use_errno=True)
    if nodes:
        mask = 0
        for node in nodes:
            mask |= 1 << node
        nodemask = (ctypes.c_ulong * 1)(mask)
        ret = libc.syscall(nr, mode, nodemask, 64)
    else:
        ret = libc.syscall(nr, mode, None, 0)
    if ret != 0:
        raise PlacementError(
            f"set_mempolicy failed: {os.strerror(ctypes.get_errno())}"
        )


def bind_data_side(report: PlacementReport) -> None:
    """Bind for the allocation phase so first touch lands on the data node."""
    if report.placement in ("none", "local"):
        if report.data_cpus:
            os.sched_setaffinity(0, report.data_cpus)
        return
    if report.placement == "remote":
        os.sched_setaffinity(0, report.data_cpus)
        return
    _set_mempolicy(_MPOL_INTERLEAVE, report.compute_nodes)


def bind_compute_side(report: PlacementReport) -> None:
    """Bind for the measured phase: the worker threads' cpu set."""
    if report.compute_cpus:
        os.sched_setaffinity(0, report.compute_cpus)


def release(report: PlacementReport, saved_cpus) -> None:
    """Undo the bindings; `saved_cpus` is the affinity set to restore."""
    if report.placement == "interleave":
        _set_mempolicy(_MPOL_DEFAULT, ())
    if report.placement != "none":
        os.sched_setaffinity(0, saved_cpus)


def pin_threads(placement: str, threads: int) -> PlacementReport:
    """Resolve a placement and bind the process to its compute cores."""
    report = plan_placement(placement, threads)
    bind_compute_side(report)
    return report
