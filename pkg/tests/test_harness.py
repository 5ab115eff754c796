"""Harness tests: config validation, record shape, emission, CLI.

The CSV header is pinned as a literal so schema drift fails loudly.
Statistics tests recompute mean and stddev from the emitted raw rows
and demand the summary rows match at 6 significant digits.
"""

import csv
import json
import os
import statistics

import numpy as np
import pytest

from olapbench import cli, harness, timing
from olapbench.datagen import Relation, generate_column
from olapbench.datagen.io import write_relation
from olapbench.harness import (
    CSV_COLUMNS,
    BenchConfig,
    emit_results,
    load_results,
    run_experiment,
    tuples_of_mb,
)
from olapbench.queries import QUERY_PLANS

GOLDEN_HEADER = (
    "experiment,algo,query,build_mb,probe_mb,size_mb,width,steps,"
    "scale_factor,selectivity,threads,reps,radix_bits1,radix_bits2,"
    "kernel,queue,materialize,alloc,placement,seed,rep,timer,elapsed_ns,"
    "throughput,result,minor_faults,t_hist1_ns,t_copy1_ns,t_hist2_ns,"
    "t_copy2_ns,t_crack_ns,t_build_ns,t_probe_ns,t_compact_ns,"
    "t_filter_customer_ns,t_filter_orders_ns,t_filter_part_ns,"
    "t_filter_lineitem_ns,t_join_customer_orders_ns,"
    "t_join_orders_lineitem_ns,t_join_part_lineitem_ns,"
    "t_residual_filter_ns,t_count_ns"
)

JOIN_CONFIG = BenchConfig(
    experiment="join", algo="rho", build_mb=0.5, probe_mb=2.0,
    radix_bits=(6, 6), threads=2, repetitions=4, materialize=True, seed=11,
)


@pytest.fixture(scope="module")
def join_records():
    return run_experiment(JOIN_CONFIG)


@pytest.fixture(scope="module")
def join_csv(tmp_path_factory, join_records):
    path = tmp_path_factory.mktemp("emit") / "join.csv"
    emit_results(join_records, str(path), "csv")
    return path.read_text().splitlines()


def test_golden_header():
    assert ",".join(CSV_COLUMNS) == GOLDEN_HEADER


def test_tuples_of_mb():
    assert tuples_of_mb(1.0) == 131072
    assert tuples_of_mb(0.0078125) == 1024
    assert tuples_of_mb(0.0) == 0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(experiment="sort"),
        dict(experiment="join", repetitions=0),
        dict(experiment="join", threads=0),
        dict(experiment="join", queue_kind="spin"),
        dict(experiment="join", allocation_mode="eager"),
        dict(experiment="join", placement="far"),
        dict(experiment="join", fmt="xml"),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        BenchConfig(**kwargs)


def test_unknown_join_algo_and_query():
    with pytest.raises(ValueError, match="algo"):
        run_experiment(BenchConfig(experiment="join", algo="grace"))
    with pytest.raises(ValueError, match="query"):
        run_experiment(BenchConfig(experiment="query", query_id=6))
    with pytest.raises(ValueError, match="micro"):
        run_experiment(BenchConfig(experiment="micro", algo="flush", size_mb=1))


def test_join_record_shape(join_records):
    build_n = tuples_of_mb(JOIN_CONFIG.build_mb)
    probe_n = tuples_of_mb(JOIN_CONFIG.probe_mb)
    assert [r.rep for r in join_records] == list(range(4))
    timer_kind = timing.get_timer().kind
    for r in join_records:
        assert r.config == JOIN_CONFIG
        assert r.timer == timer_kind
        assert r.elapsed_ns > 0
        assert r.result == probe_n  # every probe tuple has its match
        assert r.minor_faults >= 0
        assert r.throughput == pytest.approx(
            (build_n + probe_n) / (r.elapsed_ns * 1e-9), rel=1e-12
        )
        assert set(r.phases) == {
            "hist1", "copy1", "hist2", "copy2", "build", "probe", "compact"
        }


def test_csv_shape(join_records, join_csv):
    assert join_csv[0] == GOLDEN_HEADER
    assert len(join_csv) == 1 + len(join_records) + 2
    reps = [line.split(",")[20] for line in join_csv[1:]]
    assert reps == ["0", "1", "2", "3", "mean", "stddev"]


def test_csv_summary_matches_recomputation(join_csv):
    rows = list(csv.DictReader(join_csv))
    raw = [r for r in rows if r["rep"].isdigit()]
    mean_row = next(r for r in rows if r["rep"] == "mean")
    stddev_row = next(r for r in rows if r["rep"] == "stddev")
    stat_cols = [c for c in CSV_COLUMNS if c == "elapsed_ns" or c == "result"
                 or c == "minor_faults" or c.startswith("t_")]
    checked = 0
    for col in stat_cols:
        values = [float(r[col]) for r in raw if r[col] != ""]
        if not values:
            assert mean_row[col] == "" and stddev_row[col] == ""
            continue
        assert mean_row[col] == f"{statistics.fmean(values):.6g}"
        assert stddev_row[col] == f"{statistics.stdev(values):.6g}"
        checked += 1
    assert checked >= 10  # elapsed, result, faults, and the join phases


def test_csv_mean_throughput_identity(join_csv):
    rows = list(csv.DictReader(join_csv))
    raw = [r for r in rows if r["rep"].isdigit()]
    mean_row = next(r for r in rows if r["rep"] == "mean")
    stddev_row = next(r for r in rows if r["rep"] == "stddev")
    tuples = tuples_of_mb(JOIN_CONFIG.build_mb) + tuples_of_mb(JOIN_CONFIG.probe_mb)
    mean_elapsed_s = statistics.fmean(int(r["elapsed_ns"]) for r in raw) * 1e-9
    expected = tuples / mean_elapsed_s
    assert float(mean_row["throughput"]) == pytest.approx(expected, rel=1e-3)
    assert stddev_row["throughput"] == ""


def test_config_echo_complete(join_csv):
    row = next(csv.DictReader(join_csv))
    assert row["experiment"] == "join"
    assert row["algo"] == "rho"
    assert row["build_mb"] == "0.5"
    assert row["probe_mb"] == "2"
    assert row["radix_bits1"] == "6"
    assert row["radix_bits2"] == "6"
    assert row["kernel"] == "naive"
    assert row["queue"] == "lockfree"
    assert row["materialize"] == "1"
    assert row["alloc"] == "prealloc_touch"
    assert row["placement"] == "none"
    assert row["seed"] == "11"
    assert row["threads"] == "2"
    assert row["reps"] == "4"


def test_empty_emission_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_results([], str(path), "csv")
    assert path.read_text() == GOLDEN_HEADER + "\n"
    jpath = tmp_path / "empty.json"
    emit_results([], str(jpath), "json")
    assert json.loads(jpath.read_text()) == []


def test_json_round_trip(tmp_path, join_records):
    path = tmp_path / "join.json"
    emit_results(join_records, str(path), "json")
    rows = json.loads(path.read_text())
    assert len(rows) == len(join_records) + 2
    assert all(set(r) == set(CSV_COLUMNS) for r in rows)
    assert load_results(str(path)) == join_records


def test_emission_to_stdout(capsys, join_records):
    emit_results(join_records[:1], "", "csv")
    out = capsys.readouterr().out.splitlines()
    assert out[0] == GOLDEN_HEADER
    assert len(out) == 4


def test_emit_rejects_unknown_format(tmp_path, join_records):
    with pytest.raises(ValueError):
        emit_results(join_records, str(tmp_path / "x"), "tsv")


def test_scan_runner_matches_mask_oracle():
    config = BenchConfig(
        experiment="scan", size_mb=0.5, selectivity=0.25, threads=2,
        repetitions=2, seed=3,
    )
    records = run_experiment(config)
    from olapbench.scans import ScanPredicate

    column = generate_column(tuples_of_mb(0.5) * 8, 3)
    pred = ScanPredicate.for_selectivity(0.25)
    expected = int(((column >= pred.lower) & (column <= pred.upper)).sum())
    assert [r.result for r in records] == [expected, expected]
    lazy = run_experiment(
        BenchConfig(experiment="scan", size_mb=0.5, selectivity=0.25,
                    threads=2, repetitions=2, seed=3, allocation_mode="lazy",
                    materialize=True)
    )
    assert all(r.result == expected for r in lazy)


def test_join_alloc_modes_agree_but_fault_differently():
    base = dict(
        experiment="join", algo="rho", build_mb=1.0, probe_mb=4.0,
        radix_bits=(6, 6), threads=2, repetitions=3, materialize=True, seed=2,
    )
    touched = run_experiment(BenchConfig(**base))
    lazy = run_experiment(BenchConfig(**base, allocation_mode="lazy"))
    assert [r.result for r in touched] == [r.result for r in lazy]
    assert min(r.minor_faults for r in lazy) > max(r.minor_faults for r in touched)


def test_micro_runner_is_deterministic():
    config = BenchConfig(
        experiment="micro", algo="chase", size_mb=0.5, steps=1 << 15,
        repetitions=2, seed=5,
    )
    records = run_experiment(config)
    assert records[0].result == records[1].result
    assert all(r.elapsed_ns > 0 and r.throughput > 0 for r in records)
    writes = run_experiment(
        BenchConfig(experiment="micro", algo="randwrite", size_mb=0.5,
                    steps=1 << 15, repetitions=1, seed=5)
    )
    assert writes[0].elapsed_ns > 0


def test_query_runner_counts_and_phases():
    config = BenchConfig(
        experiment="query", query_id=3, scale_factor=0.001, threads=2,
        repetitions=2, seed=42,
    )
    records = run_experiment(config)  # sf 0.001: verification is on
    assert records[0].result == records[1].result
    assert tuple(records[0].phases) == QUERY_PLANS[3].operators


def test_data_dir_cache_is_loaded(tmp_path):
    # a pair whose probe keys never hit the build side: a run that
    # reports zero matches must have read these files, generated data
    # would have matched every probe tuple
    build_n, probe_n = 1024, 2048
    keys = np.arange(1, build_n + 1, dtype=np.uint32)
    build = Relation.from_arrays(keys, keys)
    probe_keys = np.full(probe_n, build_n + 5, dtype=np.uint32)
    probe = Relation.from_arrays(probe_keys, probe_keys)
    bpath, ppath = harness.pair_paths(str(tmp_path), build_n, probe_n, 7)
    write_relation(bpath, build)
    write_relation(ppath, probe)

    config = BenchConfig(
        experiment="join", algo="rho", build_mb=build_n * 8 / 2**20,
        probe_mb=probe_n * 8 / 2**20, radix_bits=(5, 5), repetitions=2,
        seed=7, data_dir=str(tmp_path), verify=True,
    )
    records = run_experiment(config)
    assert [r.result for r in records] == [0, 0]


def test_cli_join_writes_csv(tmp_path):
    out = tmp_path / "cli.csv"
    code = cli.main([
        "join", "--algo", "pht", "--build-mb", "0.25", "--probe-mb", "1",
        "--threads", "2", "--reps", "2", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == GOLDEN_HEADER
    assert len(lines) == 5


def test_cli_json_format(tmp_path):
    out = tmp_path / "cli.json"
    code = cli.main([
        "scan", "--size-mb", "0.25", "--reps", "2", "--format", "json",
        "--out", str(out),
    ])
    assert code == 0
    rows = json.loads(out.read_text())
    assert [r["rep"] for r in rows] == [0, 1, "mean", "stddev"]


def test_cli_stdout_default(capsys):
    code = cli.main(["micro", "chase", "--size-mb", "0.25", "--steps",
                     "16384", "--reps", "1"])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == GOLDEN_HEADER


def test_cli_query(tmp_path):
    out = tmp_path / "q.csv"
    code = cli.main(["query", "--query", "12", "--sf", "0.001", "--reps", "1",
                     "--out", str(out)])
    assert code == 0
    row = next(csv.DictReader(out.read_text().splitlines()))
    assert row["query"] == "12"
    assert row["t_count_ns"] != ""


def test_cli_gen_pair_and_reuse(tmp_path):
    code = cli.main([
        "gen", "--kind", "pair", "--build-mb", "0.0078125",
        "--probe-mb", "0.015625", "--seed", "4", "--data-dir", str(tmp_path),
    ])
    assert code == 0
    bpath, ppath = harness.pair_paths(str(tmp_path), 1024, 2048, 4)
    assert os.path.exists(bpath) and os.path.exists(ppath)
    code = cli.main([
        "join", "--build-mb", "0.0078125", "--probe-mb", "0.015625",
        "--radix-bits", "5,5", "--reps", "1", "--seed", "4",
        "--data-dir", str(tmp_path), "--out", str(tmp_path / "r.csv"),
    ])
    assert code == 0


def test_cli_gen_tpch(tmp_path):
    code = cli.main(["gen", "--kind", "tpch", "--sf", "0.001", "--seed", "4",
                     "--data-dir", str(tmp_path)])
    assert code == 0
    code = cli.main([
        "query", "--query", "10", "--sf", "0.001", "--seed", "4", "--reps", "1",
        "--data-dir", str(tmp_path), "--out", str(tmp_path / "q.csv"),
    ])
    assert code == 0


def test_cli_rejects_unknown_choices():
    with pytest.raises(SystemExit) as err:
        cli.main(["join", "--algo", "bogus"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        cli.main(["query", "--sf", "0.001"])  # --query is required
    assert err.value.code == 2


def test_cli_runtime_errors_exit_nonzero(capsys):
    code = cli.main(["join", "--build-mb", "0", "--probe-mb", "1"])
    assert code == 1
    assert "build-mb" in capsys.readouterr().err
    code = cli.main(["gen", "--kind", "pair"])
    assert code == 1


def test_cli_radix_bits_parse_error():
    with pytest.raises(SystemExit) as err:
        cli.main(["join", "--radix-bits", "7"])
    assert err.value.code == 2
