"""End-to-end acceptance gate.

Each test pins one released guarantee: join results against a
sort-merge oracle across thread counts and queue kinds, kernel-variant
equivalence, partitioning invariants, bit-exact scans at 64 MiB, the
throughput and statistics contracts of the emitted CSV, exactly-once
queue consumption under stress, query counts against the reference
executor, and the allocation-mode fault contrast. Performance
orderings are environment-dependent and only warn when violated; every
correctness check is exact at its stated tolerance.
"""

import csv
import statistics
import threading
import time
import warnings

import numpy as np
import pytest

from olapbench.datagen import Relation, generate_column, generate_fk_pair
from olapbench.datagen.tpch import generate_tpch_lite
from olapbench.harness import BenchConfig, emit_results, run_experiment, tuples_of_mb
from olapbench.joins import (
    KERNEL_VARIANTS,
    OUT_DTYPE,
    JoinOptions,
    crk_join,
    pht_join,
    rho_join,
)
from olapbench.joins.partition import (
    compute_histogram,
    crack_partition,
    radix_partition,
)
from olapbench.queries import QUERY_IDS, reference_count, run_query
from olapbench.scans import ScanPredicate, scan_bitvector, scan_indexes
from olapbench.sync import QUEUE_KINDS, contention_bench, make_queue

ALGOS = {"pht": pht_join, "rho": rho_join, "crk": crk_join}


def sort_merge_oracle(build, probe):
    """Sorted-merge join for unique build keys: count plus the ordered
    (key, build payload, probe payload) triples."""
    order = np.argsort(build.keys, kind="stable")
    bkeys = build.keys[order]
    bpays = build.payloads[order]
    pos = np.searchsorted(bkeys, probe.keys)
    pos = np.minimum(pos, len(bkeys) - 1)
    hit = bkeys[pos] == probe.keys
    triples = np.empty(int(hit.sum()), dtype=OUT_DTYPE)
    triples["key"] = probe.keys[hit]
    triples["left"] = bpays[pos[hit]]
    triples["right"] = probe.payloads[hit]
    return len(triples), np.sort(triples, order=("key", "left", "right"))


def canon(output):
    return np.sort(output, order=("key", "left", "right"))


def fitted_bits(build_n, cap=8):
    total = min(cap, max(0, build_n.bit_length() - 1))
    return (total + 1) // 2, total // 2


def test_join_correctness_random_instances():
    """All three joins reproduce the sort-merge oracle exactly on 50
    random FK instances, cycling 1/2/4/8 threads and both queues."""
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    for i in range(50):
        build_n = int(rng.integers(1, 100_001))
        probe_n = int(rng.integers(1, 400_001))
        build, probe = generate_fk_pair(build_n, probe_n, seed=9000 + i)
        count, triples = sort_merge_oracle(build, probe)
        assert count == probe_n
        b1, b2 = fitted_bits(build_n)
        opts = JoinOptions(
            threads=(1, 2, 4, 8)[i % 4],
            radix_bits_pass1=b1,
            radix_bits_pass2=b2,
            queue_kind=QUEUE_KINDS[i % 2],
            materialize=True,
        )
        for name, join in ALGOS.items():
            res = join(build, probe, opts)
            assert res.match_count == count, (name, i)
            assert np.array_equal(canon(res.output), triples), (name, i)
    assert time.monotonic() - t0 < 120


def test_join_fk_identity():
    """On FK data every probe tuple matches: count == probe cardinality."""
    build, probe = generate_fk_pair(10_000, 100_000, seed=77)
    opts = JoinOptions(threads=2, radix_bits_pass1=6, radix_bits_pass2=6)
    for join in ALGOS.values():
        assert join(build, probe, opts).match_count == probe.cardinality


def test_kernel_variant_equivalence():
    """The three histogram kernels agree on 1000 random configurations,
    and the partitioned join is variant-invariant."""
    t0 = time.monotonic()
    rng = np.random.default_rng(31)
    for _ in range(1000):
        n = int(rng.integers(0, 5000))
        bits = int(rng.integers(1, 13))
        shift = int(rng.integers(0, 33 - bits))
        keys = rng.integers(0, 1 << 32, size=n, dtype=np.uint32)
        rel = Relation.from_arrays(keys, keys)
        reference = compute_histogram(rel, bits, shift, "naive").bins
        for variant in KERNEL_VARIANTS[1:]:
            bins = compute_histogram(rel, bits, shift, variant).bins
            assert np.array_equal(bins, reference)

    build, probe = generate_fk_pair(20_000, 100_000, seed=13)
    outputs = []
    for variant in KERNEL_VARIANTS:
        opts = JoinOptions(
            threads=2, radix_bits_pass1=6, radix_bits_pass2=6,
            kernel_variant=variant, materialize=True,
        )
        res = rho_join(build, probe, opts)
        outputs.append((res.match_count, canon(res.output)))
    for count, output in outputs[1:]:
        assert count == outputs[0][0]
        assert np.array_equal(output, outputs[0][1])
    assert time.monotonic() - t0 < 60


def recursive_crack(data, radix_bits, shift):
    """Crack highest digit bit first; yields digit-ordered bounds."""
    bounds = [(0, data.cardinality)]
    for bit in range(shift + radix_bits - 1, shift - 1, -1):
        refined = []
        for lo, hi in bounds:
            split = crack_partition(Relation(data.tuples[lo:hi]), bit)
            refined.append((lo, lo + split))
            refined.append((lo + split, hi))
        bounds = refined
    return bounds


def test_partitioning_invariants():
    """Radix partitions hold exactly their digit; recursive cracking
    produces the same per-partition multisets on 100 random instances."""
    rng = np.random.default_rng(4)
    for i in range(100):
        n = int(rng.integers(1, 10_001))
        bits = int(rng.integers(1, 9))
        shift = int(rng.integers(0, 9)) if i % 2 else 0
        keys = rng.integers(0, 1 << 32, size=n, dtype=np.uint32)
        rel = Relation.from_arrays(keys, keys)

        parted = radix_partition(rel, bits, shift, threads=(1, 2, 4)[i % 3])
        mask = (1 << bits) - 1
        offsets = parted.offsets
        for d in range(1 << bits):
            lo, hi = int(offsets[d]), int(offsets[d + 1])
            digits = (parted.relation.keys[lo:hi] >> shift) & mask
            assert np.all(digits == d)

        cracked = Relation(rel.tuples.copy())
        bounds = recursive_crack(cracked, bits, shift)
        assert len(bounds) == 1 << bits
        for d, (lo, hi) in enumerate(bounds):
            ours = np.sort(cracked.as_u64()[lo:hi])
            theirs = np.sort(
                parted.relation.as_u64()[int(offsets[d]):int(offsets[d + 1])]
            )
            assert np.array_equal(ours, theirs), (i, d)


def test_scan_bit_exact_at_64mib():
    """Bitvector scans are bit-for-bit across 1..16 threads on a 64 MiB
    column; index scans list the set bits; selectivity lands on half."""
    n = 64 << 20
    column = generate_column(n, seed=5)
    pred = ScanPredicate(0, 127)
    mask = (column >= pred.lower) & (column <= pred.upper)
    reference = np.packbits(mask, bitorder="little").view(np.uint64)

    for threads in range(1, 17):
        bv = scan_bitvector(column, pred, threads=threads)
        assert bv.length_bits == n
        assert np.array_equal(bv.words, reference), threads

    iv = scan_indexes(column, pred, threads=5)
    assert np.array_equal(iv.indexes, np.flatnonzero(mask))

    selectivity = iv.count / n
    assert abs(selectivity - 0.5) < 1e-3


def test_native_performance_orderings():
    """Throughput orderings at 25 MB / 100 MB with 8 threads. These
    depend on the machine (core count, SMT, cache sizes), so a
    violation warns instead of failing; result counts stay exact."""
    t0 = time.monotonic()
    build, probe = generate_fk_pair(
        tuples_of_mb(25.0), tuples_of_mb(100.0), seed=1
    )
    tuples = build.cardinality + probe.cardinality

    def mean_elapsed(join, variant):
        opts = JoinOptions(
            threads=8, radix_bits_pass1=7, radix_bits_pass2=7,
            kernel_variant=variant,
        )
        join(build, probe, opts)  # warm-up
        spans = []
        for _ in range(3):
            res = join(build, probe, opts)
            assert res.match_count == probe.cardinality
            spans.append(res.elapsed_ns)
        return statistics.fmean(spans)

    elapsed = {
        "pht": mean_elapsed(pht_join, "naive"),
        "rho": mean_elapsed(rho_join, "naive"),
        "crk": mean_elapsed(crk_join, "naive"),
        "rho_unrolled8": mean_elapsed(rho_join, "unrolled8"),
    }
    throughput = {k: tuples / (v * 1e-9) for k, v in elapsed.items()}

    if throughput["rho"] < throughput["pht"]:
        warnings.warn(
            f"partitioned join slower than shared hash table: "
            f"{throughput['rho']:.3g} < {throughput['pht']:.3g} tuples/s"
        )
    if throughput["crk"] > throughput["rho"]:
        warnings.warn(
            f"cracking outran full partitioning: "
            f"{throughput['crk']:.3g} > {throughput['rho']:.3g} tuples/s"
        )
    if elapsed["rho_unrolled8"] > 1.05 * elapsed["rho"]:
        warnings.warn(
            f"unrolled histogram kernel over 5% behind: "
            f"{elapsed['rho_unrolled8']:.3g} vs {elapsed['rho']:.3g} ns"
        )
    assert time.monotonic() - t0 < 300


@pytest.fixture(scope="module")
def harness_csv(tmp_path_factory):
    config = BenchConfig(
        experiment="join", algo="rho", build_mb=0.25, probe_mb=1.0,
        radix_bits=(5, 5), threads=2, repetitions=10, materialize=False,
        seed=6,
    )
    records = run_experiment(config)
    path = tmp_path_factory.mktemp("acceptance") / "rho.csv"
    emit_results(records, str(path), "csv")
    return list(csv.DictReader(path.read_text().splitlines()))


def test_throughput_metric_identity(harness_csv):
    """Summary throughput is total tuples over mean elapsed, within 0.1%."""
    raw = [r for r in harness_csv if r["rep"].isdigit()]
    mean_row = next(r for r in harness_csv if r["rep"] == "mean")
    tuples = tuples_of_mb(0.25) + tuples_of_mb(1.0)
    mean_s = statistics.fmean(int(r["elapsed_ns"]) for r in raw) * 1e-9
    relative = abs(float(mean_row["throughput"]) - tuples / mean_s) / (tuples / mean_s)
    assert relative < 1e-3


def test_harness_statistics_recompute(harness_csv):
    """Ten raw rows; their mean and stddev reproduce the summary rows
    at 6 significant digits for every statistics column."""
    raw = [r for r in harness_csv if r["rep"].isdigit()]
    assert len(raw) == 10
    mean_row = next(r for r in harness_csv if r["rep"] == "mean")
    stddev_row = next(r for r in harness_csv if r["rep"] == "stddev")
    cols = ["elapsed_ns", "result", "minor_faults"] + [
        c for c in raw[0] if c.startswith("t_") and raw[0][c] != ""
    ]
    assert len(cols) >= 9
    for col in cols:
        values = [float(r[col]) for r in raw]
        assert mean_row[col] == f"{statistics.fmean(values):.6g}", col
        assert stddev_row[col] == f"{statistics.stdev(values):.6g}", col


def test_queue_exactly_once_under_stress():
    """A million tasks drained by 16 threads: every task exactly once,
    checked by per-thread flag arrays; join results do not depend on
    the queue kind."""
    tasks = 1_000_000
    for kind in QUEUE_KINDS:
        q = make_queue(kind, capacity=tasks)
        for t in range(tasks):
            assert q.push(t)
        flags = [np.zeros(tasks, dtype=np.uint8) for _ in range(16)]

        def consume(mine):
            while True:
                t = q.pop()
                if t is None:
                    return
                mine[t] += 1

        threads = [
            threading.Thread(target=consume, args=(flags[i],)) for i in range(16)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        total = np.zeros(tasks, dtype=np.uint32)
        for mine in flags:
            total += mine
        assert int(total.min()) == 1 and int(total.max()) == 1, kind

        bench = contention_bench(kind, threads=16, tasks=100_000)
        assert bench.op_count == 100_000

    build, probe = generate_fk_pair(10_000, 50_000, seed=3)
    outputs = []
    for kind in QUEUE_KINDS:
        opts = JoinOptions(
            threads=4, radix_bits_pass1=5, radix_bits_pass2=5,
            queue_kind=kind, materialize=True,
        )
        res = rho_join(build, probe, opts)
        outputs.append((res.match_count, canon(res.output)))
    assert outputs[0][0] == outputs[1][0]
    assert np.array_equal(outputs[0][1], outputs[1][1])


def test_query_counts_match_reference():
    """All four queries equal the scalar reference on 20 generated
    databases, whatever the thread count, join kind, kernel, or queue."""
    t0 = time.monotonic()
    for seed in range(20):
        db = generate_tpch_lite(0.001, seed=seed)
        threads = (1, 2)[seed % 2]
        join_kind = ("rho", "pht")[(seed // 2) % 2]
        kernel = KERNEL_VARIANTS[seed % 3]
        queue = QUEUE_KINDS[seed % 2]
        for query_id in QUERY_IDS:
            expected = reference_count(query_id, db)
            got = run_query(
                query_id, db, threads=threads, join_kind=join_kind,
                kernel_variant=kernel, queue_kind=queue,
            )
            assert got.count == expected, (query_id, seed)

    db = generate_tpch_lite(0.001, seed=0)
    counts = {
        run_query(3, db, threads=t, join_kind=jk, kernel_variant=kv,
                  queue_kind=qk).count
        for t in (1, 2)
        for jk in ("rho", "pht")
        for kv in KERNEL_VARIANTS
        for qk in QUEUE_KINDS
    }
    assert len(counts) == 1
    assert time.monotonic() - t0 < 120


def test_allocation_modes_contrast():
    """Both allocation modes give identical join results; the lazy mode
    faults strictly more inside the timed region, every repetition."""
    base = dict(
        experiment="join", algo="rho", build_mb=1.0, probe_mb=4.0,
        radix_bits=(6, 6), threads=2, repetitions=3, materialize=True,
        seed=8,
    )
    touched = run_experiment(BenchConfig(**base))
    lazy = run_experiment(BenchConfig(**base, allocation_mode="lazy"))
    assert [r.result for r in touched] == [r.result for r in lazy]
    assert min(r.minor_faults for r in lazy) > max(r.minor_faults for r in touched)
