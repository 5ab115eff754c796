"""Benchmark driver: configuration, repetition, statistics, emission.

An experiment runs one workload (join, scan, micro, query) for a fixed
number of repetitions and yields one ResultRecord per repetition, each
echoing the full configuration so every row stands alone. Emission
writes the raw rows plus a mean and a sample-stddev row; the summary is
always recomputable from the raw rows. Timed regions live inside the
workload implementations and exclude generation, compilation warm-up,
and (in prealloc mode) buffer allocation; verification, when enabled,
runs after the repetitions against join-free oracles.

The CSV header is fixed. Time columns are integer nanoseconds, so the
raw rows carry exact values; other floats are written with 6
significant digits. The mean row's throughput is derived from the mean
elapsed time, not averaged over the per-repetition throughputs.
"""

from __future__ import annotations

import json
import os
import resource
import statistics
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import affinity, timing
from .datagen import generate_column, generate_fk_pair
from .datagen.io import MANIFEST_NAME, load_tpch_lite, read_relation
from .datagen.tpch import generate_tpch_lite
from .joins import (
    ALLOCATION_MODES,
    JoinOptions,
    crk_join,
    pht_join,
    rho_join,
)
from .queries import QUERY_IDS, reference_count, run_query
from .scans import ScanPredicate, scan_bitvector, scan_indexes
from .sync import QUEUE_KINDS

EXPERIMENTS = ("join", "scan", "micro", "query")
JOIN_ALGOS = ("pht", "rho", "crk")
MICRO_NAMES = ("chase", "randwrite", "read", "write")
FORMATS = ("csv", "json")

_VERIFY_LIMIT_BYTES = 1 << 30  # above this, verification defaults off
_DEFAULT_STEPS = 1 << 22


@dataclass(frozen=True)
class BenchConfig:
    """One experiment's full parameter set; frozen so rows can echo it."""

    experiment: str
    algo: str = ""
    query_id: int = 0
    build_mb: float = 0.0
    probe_mb: float = 0.0
    size_mb: float = 0.0
    width: int = 64
    steps: int = 0
    scale_factor: float = 0.0
    selectivity: float = 0.5
    threads: int = 1
    repetitions: int = 10
    radix_bits: tuple[int, int] | None = None
    kernel_variant: str = "naive"
    queue_kind: str = "lockfree"
    materialize: bool = False
    allocation_mode: str = "prealloc_touch"
    placement: str = "none"
    seed: int = 0
    verify: bool | None = None  # None: on up to 1 GB of input, off above
    out: str = ""
    fmt: str = "csv"
    data_dir: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.queue_kind not in QUEUE_KINDS:
            raise ValueError(f"queue_kind must be one of {QUEUE_KINDS}")
        if self.allocation_mode not in ALLOCATION_MODES:
            raise ValueError(f"allocation_mode must be one of {ALLOCATION_MODES}")
        if self.placement not in affinity.PLACEMENTS:
            raise ValueError(f"placement must be one of {affinity.PLACEMENTS}")
        if self.fmt not in FORMATS:
            raise ValueError(f"fmt must be one of {FORMATS}")


_CONFIG_COLUMNS = (
    "experiment", "algo", "query", "build_mb", "probe_mb", "size_mb",
    "width", "steps", "scale_factor", "selectivity", "threads", "reps",
    "radix_bits1", "radix_bits2", "kernel", "queue", "materialize",
    "alloc", "placement", "seed",
)

_RESULT_COLUMNS = (
    "rep", "timer", "elapsed_ns", "throughput", "result", "minor_faults",
)

_PHASE_COLUMNS = (
    "t_hist1_ns", "t_copy1_ns", "t_hist2_ns", "t_copy2_ns", "t_crack_ns",
    "t_build_ns", "t_probe_ns", "t_compact_ns",
    "t_filter_customer_ns", "t_filter_orders_ns", "t_filter_part_ns",
    "t_filter_lineitem_ns", "t_join_customer_orders_ns",
    "t_join_orders_lineitem_ns", "t_join_part_lineitem_ns",
    "t_residual_filter_ns", "t_count_ns",
)

CSV_COLUMNS = _CONFIG_COLUMNS + _RESULT_COLUMNS + _PHASE_COLUMNS


@dataclass(frozen=True)
class ResultRecord:
    """One repetition: config echo plus measurements.

    Times are integer nanoseconds. `throughput` is per-second work
    units (tuples, rows, ops, or queries depending on the experiment),
    None when the repetition was too fast to time. `result` is the
    experiment's check value (match count, scan count, or checksum);
    `minor_faults` counts page faults inside the timed region."""

    config: BenchConfig
    rep: int
    timer: str
    elapsed_ns: int
    throughput: float | None
    result: int
    minor_faults: int
    phases: dict[str, int]


def _record(config, rep, elapsed_ns, units, result, faults, phases) -> ResultRecord:
    elapsed = int(round(elapsed_ns))
    throughput = units / (elapsed * 1e-9) if elapsed > 0 and units else None
    clean = {}
    for name, ns in phases.items():
        if f"t_{name}_ns" not in _PHASE_COLUMNS:
            raise ValueError(f"phase {name!r} has no CSV column")
        clean[name] = int(round(ns))
    return ResultRecord(
        config=config,
        rep=rep,
        timer=timing.get_timer().kind,
        elapsed_ns=elapsed,
        throughput=throughput,
        result=int(result),
        minor_faults=int(faults),
        phases=clean,
    )


def row_values(record: ResultRecord) -> dict:
    """Flatten one record into CSV/JSON column values (None = empty)."""
    c = record.config
    bits = c.radix_bits if c.radix_bits is not None else (None, None)
    row = {
        "experiment": c.experiment,
        "algo": c.algo,
        "query": c.query_id,
        "build_mb": c.build_mb,
        "probe_mb": c.probe_mb,
        "size_mb": c.size_mb,
        "width": c.width,
        "steps": c.steps,
        "scale_factor": c.scale_factor,
        "selectivity": c.selectivity,
        "threads": c.threads,
        "reps": c.repetitions,
        "radix_bits1": bits[0],
        "radix_bits2": bits[1],
        "kernel": c.kernel_variant,
        "queue": c.queue_kind,
        "materialize": c.materialize,
        "alloc": c.allocation_mode,
        "placement": c.placement,
        "seed": c.seed,
        "rep": record.rep,
        "timer": record.timer,
        "elapsed_ns": record.elapsed_ns,
        "throughput": record.throughput,
        "result": record.result,
        "minor_faults": record.minor_faults,
    }
    for col in _PHASE_COLUMNS:
        row[col] = None
    for name, ns in record.phases.items():
        row[f"t_{name}_ns"] = ns
    return row


def summary_rows(records: list[ResultRecord]) -> list[dict]:
    """Mean and sample-stddev rows over the raw repetition rows.

    Statistics cover elapsed_ns, result, minor_faults, and the phase
    columns. The mean row's throughput is units / mean elapsed; the
    stddev row leaves it empty.
    """
    rows = [row_values(r) for r in records]
    stat_cols = ("elapsed_ns", "result", "minor_faults") + _PHASE_COLUMNS
    mean_row = dict(rows[0])
    stddev_row = dict(rows[0])
    mean_row["rep"], stddev_row["rep"] = "mean", "stddev"
    mean_row["throughput"] = stddev_row["throughput"] = None
    for col in stat_cols:
        values = [row[col] for row in rows if row[col] is not None]
        if not values:
            mean_row[col] = stddev_row[col] = None
            continue
        mean_row[col] = statistics.fmean(values)
        stddev_row[col] = statistics.stdev(values) if len(values) > 1 else 0.0
    first = records[0]
    if first.throughput is not None and mean_row["elapsed_ns"]:
        units = first.throughput * first.elapsed_ns * 1e-9
        mean_row["throughput"] = units / (mean_row["elapsed_ns"] * 1e-9)
    return [mean_row, stddev_row]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_results(records: list[ResultRecord], path: str, fmt: str = "csv") -> None:
    """Write raw rows plus summary rows; path "" or "-" means stdout.

    CSV uses the fixed CSV_COLUMNS header; JSON mirrors the same rows
    as a list of objects, with full float precision.
    """
    if fmt not in FORMATS:
        raise ValueError(f"fmt must be one of {FORMATS}")
    rows = [row_values(r) for r in records]
    if records:
        rows.extend(summary_rows(records))
    if fmt == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        lines = [",".join(CSV_COLUMNS)]
        for row in rows:
            lines.append(",".join(_cell(row[col]) for col in CSV_COLUMNS))
        text = "\n".join(lines) + "\n"
    if path in ("", "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)


def load_results(path: str) -> list[ResultRecord]:
    """Rebuild the raw ResultRecords from a JSON emission (summary rows
    are recognized by their rep label and skipped)."""
    with open(path) as f:
        rows = json.load(f)
    records = []
    for row in rows:
        if not isinstance(row["rep"], int):
            continue
        bits = None
        if row["radix_bits1"] is not None:
            bits = (row["radix_bits1"], row["radix_bits2"])
        config = BenchConfig(
            experiment=row["experiment"],
            algo=row["algo"],
            query_id=row["query"],
            build_mb=row["build_mb"],
            probe_mb=row["probe_mb"],
            size_mb=row["size_mb"],
            width=row["width"],
            steps=row["steps"],
            scale_factor=row["scale_factor"],
            selectivity=row["selectivity"],
            threads=row["threads"],
            repetitions=row["reps"],
            radix_bits=bits,
            kernel_variant=row["kernel"],
            queue_kind=row["queue"],
            materialize=row["materialize"],
            allocation_mode=row["alloc"],
            placement=row["placement"],
            seed=row["seed"],
        )
        phases = {
            col[2:-3]: row[col] for col in _PHASE_COLUMNS if row[col] is not None
        }
        records.append(
            ResultRecord(
                config=config,
                rep=row["rep"],
                timer=row["timer"],
                elapsed_ns=row["elapsed_ns"],
                throughput=row["throughput"],
                result=row["result"],
                minor_faults=row["minor_faults"],
                phases=phases,
            )
        )
    return records


def tuples_of_mb(mb: float) -> int:
    """8-byte tuples filling mb MiB."""
    return int(round(mb * (1 << 20) / 8))


def pair_paths(data_dir: str, build_n: int, probe_n: int, seed: int):
    base = os.path.join(data_dir, f"pair_b{build_n}_p{probe_n}_s{seed}")
    return base + ".build.rel", base + ".probe.rel"


def tpch_dir(data_dir: str, scale_factor: float, seed: int) -> str:
    return os.path.join(data_dir, f"tpch_sf{scale_factor:g}_s{seed}")


def _data_dir(config: BenchConfig) -> str:
    return config.data_dir or os.environ.get("OLAPBENCH_DATA_DIR", "")


def _faults() -> int:
    return resource.getrusage(resource.RUSAGE_SELF).ru_minflt


def _resolve_verify(config: BenchConfig, input_bytes: int) -> bool:
    if config.verify is not None:
        return config.verify
    return input_bytes <= _VERIFY_LIMIT_BYTES


def _auto_bits(build_n: int) -> tuple[int, int]:
    total = min(14, max(0, build_n.bit_length() - 1))
    return (total + 1) // 2, total // 2


def _load_or_generate_pair(config, build_n, probe_n):
    d = _data_dir(config)
    if d:
        bpath, ppath = pair_paths(d, build_n, probe_n, config.seed)
        if os.path.exists(bpath) and os.path.exists(ppath):
            return read_relation(bpath), read_relation(ppath)
    return generate_fk_pair(build_n, probe_n, config.seed)


def _load_or_generate_tpch(config, scale_factor):
    d = _data_dir(config)
    if d:
        path = tpch_dir(d, scale_factor, config.seed)
        if os.path.exists(os.path.join(path, MANIFEST_NAME)):
            return load_tpch_lite(path)
    return generate_tpch_lite(scale_factor, config.seed)


def _run_join(config: BenchConfig, report) -> list[ResultRecord]:
    if config.algo not in JOIN_ALGOS:
        raise ValueError(f"join algo must be one of {JOIN_ALGOS}, got {config.algo!r}")
    build_n = tuples_of_mb(config.build_mb)
    probe_n = tuples_of_mb(config.probe_mb)
    if build_n < 1:
        raise ValueError("join needs a positive --build-mb")
    affinity.bind_data_side(report)
    build, probe = _load_or_generate_pair(config, build_n, probe_n)
    bits = config.radix_bits or _auto_bits(build.cardinality)
    opts = JoinOptions(
        threads=config.threads,
        radix_bits_pass1=bits[0],
        radix_bits_pass2=bits[1],
        kernel_variant=config.kernel_variant,
        queue_kind=config.queue_kind,
        materialize=config.materialize,
        allocation_mode=config.allocation_mode,
    )
    join = {"pht": pht_join, "rho": rho_join, "crk": crk_join}[config.algo]
    join(build, probe, opts)  # warm-up: compilation and branch caches
    affinity.bind_compute_side(report)

    units = build.cardinality + probe.cardinality
    records = []
    counts = set()
    for rep in range(config.repetitions):
        res = join(build, probe, opts)
        counts.add(res.match_count)
        records.append(
            _record(config, rep, res.elapsed_ns, units, res.match_count,
                    res.minor_faults, res.phase_times)
        )
    if _resolve_verify(config, units * 8):
        expected = int(np.isin(probe.keys, build.keys).sum())
        if counts != {expected}:
            raise RuntimeError(
                f"join verification failed: counts {sorted(counts)}, "
                f"membership oracle says {expected}"
            )
    return records


def _run_scan(config: BenchConfig, report) -> list[ResultRecord]:
    n = int(round(config.size_mb * (1 << 20)))
    if n < 1:
        raise ValueError("scan needs a positive --size-mb")
    affinity.bind_data_side(report)
    column = generate_column(n, config.seed)
    pred = ScanPredicate.for_selectivity(config.selectivity)
    touch = config.allocation_mode == "prealloc_touch"
    n_words = (n + 63) // 64

    def fresh_buffer():
        if config.materialize:
            buf = np.empty(n, np.uint64)
        else:
            buf = np.empty(n_words, np.uint64)
        if touch:
            flat = buf.view(np.uint8)
            flat[::4096] = 0
            flat[-1] = 0
        return buf

    # warm-up on a slice: compiles the kernels outside the timed region
    warm = column[: min(n, 4096)].copy()
    scan_bitvector(warm, pred)
    scan_indexes(warm, pred)

    steady = fresh_buffer() if touch else None
    affinity.bind_compute_side(report)
    timer = timing.get_timer()
    records = []
    results = set()
    for rep in range(config.repetitions):
        buf = steady if touch else fresh_buffer()
        f0 = _faults()
        t0 = timing.start(timer)
        if config.materialize:
            out = scan_indexes(column, pred, threads=config.threads, scratch=buf)
            value = out.count
        else:
            out = scan_bitvector(column, pred, threads=config.threads, out=buf)
            value = None
        elapsed = timing.elapsed_ns(timer, t0)
        faults = _faults() - f0
        if value is None:
            value = out.popcount()  # untimed
        results.add(value)
        records.append(_record(config, rep, elapsed, n, value, faults, {}))
    if _resolve_verify(config, n):
        mask = (column >= pred.lower) & (column <= pred.upper)
        expected = int(mask.sum())
        if results != {expected}:
            raise RuntimeError(
                f"scan verification failed: counts {sorted(results)}, "
                f"reference mask says {expected}"
            )
    return records


def _run_micro(config: BenchConfig, report) -> list[ResultRecord]:
    from . import microbench

    if config.algo not in MICRO_NAMES:
        raise ValueError(
            f"micro benchmark must be one of {MICRO_NAMES}, got {config.algo!r}"
        )
    size = int(round(config.size_mb * (1 << 20)))
    if size < 1:
        raise ValueError("micro needs a positive --size-mb")
    steps = config.steps or _DEFAULT_STEPS
    affinity.bind_data_side(report)
    affinity.bind_compute_side(report)

    def run_once():
        if config.algo == "chase":
            return microbench.chase_chain(size, steps, config.seed)
        if config.algo == "randwrite":
            return microbench.random_writes(size, steps, config.seed)
        if config.algo == "read":
            return microbench.linear_read(size, config.width, config.threads)
        return microbench.linear_write(size, config.width, config.threads)

    records = []
    for rep in range(config.repetitions):
        f0 = _faults()
        res = run_once()
        faults = _faults() - f0
        records.append(
            _record(config, rep, res.elapsed_ns, res.op_count, res.checksum,
                    faults, {})
        )
    return records


def _run_query(config: BenchConfig, report) -> list[ResultRecord]:
    if config.query_id not in QUERY_IDS:
        raise ValueError(f"query must be one of {QUERY_IDS}, got {config.query_id}")
    scale_factor = config.scale_factor or 0.01
    join_kind = config.algo or "rho"
    affinity.bind_data_side(report)
    db = _load_or_generate_tpch(config, scale_factor)
    args = dict(
        threads=config.threads,
        join_kind=join_kind,
        kernel_variant=config.kernel_variant,
        queue_kind=config.queue_kind,
    )
    run_query(config.query_id, db, **args)  # warm-up
    affinity.bind_compute_side(report)

    records = []
    counts = set()
    for rep in range(config.repetitions):
        f0 = _faults()
        qr = run_query(config.query_id, db, **args)
        faults = _faults() - f0
        counts.add(qr.count)
        records.append(
            _record(config, rep, qr.elapsed_ns, 1, qr.count, faults,
                    qr.operator_ns)
        )
    verify = config.verify if config.verify is not None else scale_factor <= 0.002
    if verify:
        expected = reference_count(config.query_id, db)
        if counts != {expected}:
            raise RuntimeError(
                f"query verification failed: counts {sorted(counts)}, "
                f"reference executor says {expected}"
            )
    return records


_RUNNERS = {
    "join": _run_join,
    "scan": _run_scan,
    "micro": _run_micro,
    "query": _run_query,
}


def run_experiment(config: BenchConfig) -> list[ResultRecord]:
    """Run one experiment and return its raw repetition records.

    Placement is resolved before any data is generated, so an
    unsatisfiable placement fails fast; the process affinity and memory
    policy are restored afterwards.
    """
    if config.experiment not in _RUNNERS:
        raise ValueError(
            f"invalid experiment name {config.experiment!r}, have {EXPERIMENTS}"
        )
    report = affinity.plan_placement(config.placement, config.threads)
    saved = os.sched_getaffinity(0)
    try:
        return _RUNNERS[config.experiment](config, report)
    finally:
        affinity.release(report, saved)
