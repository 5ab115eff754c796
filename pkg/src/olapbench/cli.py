"""Command-line front end for the benchmark harness.

Subcommands map one-to-one onto the experiment kinds, plus `gen` for
writing reusable datasets. Results go to stdout or --out in CSV or
JSON. Exit status is 0 on success and 1 on any configuration or
runtime error, with the message on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .datagen.io import save_tpch_lite, write_relation
from .datagen.relations import generate_fk_pair
from .datagen.tpch import generate_tpch_lite
from .joins import KERNEL_VARIANTS
from .queries import QUERY_IDS
from .sync import QUEUE_KINDS

_ALLOC_CHOICES = {"prealloc": "prealloc_touch", "lazy": "lazy"}


def _parse_radix_bits(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two integers, like 7,7")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radix bits {text!r}") from None


def _add_common(p):
    p.add_argument("--threads", type=int, default=1, help="worker thread count")
    p.add_argument("--reps", type=int, default=10, help="timed repetitions")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument(
        "--alloc", choices=sorted(_ALLOC_CHOICES), default="prealloc",
        help="buffer allocation mode (prealloc touches pages up front)",
    )
    p.add_argument(
        "--placement", choices=harness.affinity.PLACEMENTS, default="none",
        help="thread and memory placement across NUMA nodes",
    )
    p.add_argument(
        "--verify", action=argparse.BooleanOptionalAction, default=None,
        help="check results against an oracle (default: on up to 1 GB)",
    )
    p.add_argument("--out", default="", help="output file (default stdout)")
    p.add_argument("--format", choices=harness.FORMATS, default="csv")
    p.add_argument(
        "--data-dir", default=os.environ.get("OLAPBENCH_DATA_DIR", ""),
        help="directory of pregenerated datasets (env OLAPBENCH_DATA_DIR)",
    )


def _add_join_shape(p):
    p.add_argument(
        "--radix-bits", type=_parse_radix_bits, default=None, metavar="B1,B2",
        help="partition bits per pass (default sized from build cardinality)",
    )
    p.add_argument("--kernel", choices=KERNEL_VARIANTS, default="naive")
    p.add_argument("--queue", choices=QUEUE_KINDS, default="lockfree")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="olapbench",
        description="in-memory analytical operator benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("join", help="hash join throughput")
    p.add_argument("--algo", choices=harness.JOIN_ALGOS, default="rho")
    p.add_argument("--build-mb", type=float, default=16.0)
    p.add_argument("--probe-mb", type=float, default=64.0)
    _add_join_shape(p)
    p.add_argument("--materialize", action="store_true",
                   help="write out join pairs instead of counting")
    _add_common(p)

    p = sub.add_parser("scan", help="filter scan over a byte column")
    p.add_argument("--size-mb", type=float, default=64.0)
    p.add_argument("--selectivity", type=float, default=0.5)
    p.add_argument("--materialize", action="store_true",
                   help="produce row indexes instead of a bitvector")
    _add_common(p)

    p = sub.add_parser("micro", help="memory micro-benchmarks")
    p.add_argument("name", choices=harness.MICRO_NAMES)
    p.add_argument("--size-mb", type=float, default=64.0)
    p.add_argument("--width", type=int, choices=(64, 512), default=64,
                   help="access width in bits for read/write sweeps")
    p.add_argument("--steps", type=int, default=0,
                   help="dependent accesses for chase/randwrite")
    _add_common(p)

    p = sub.add_parser("query", help="multi-join analytical queries")
    p.add_argument("--query", type=int, choices=QUERY_IDS, required=True)
    p.add_argument("--sf", type=float, default=0.01, help="scale factor")
    p.add_argument("--algo", choices=("rho", "pht"), default="rho",
                   help="join operator used by the plan")
    _add_join_shape(p)
    _add_common(p)

    p = sub.add_parser("gen", help="write datasets for later runs")
    p.add_argument("--kind", choices=("pair", "tpch"), required=True)
    p.add_argument("--build-mb", type=float, default=16.0)
    p.add_argument("--probe-mb", type=float, default=64.0)
    p.add_argument("--sf", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--data-dir", default=os.environ.get("OLAPBENCH_DATA_DIR", ""),
        help="target directory (env OLAPBENCH_DATA_DIR)",
    )
    return parser


def _config_from(args) -> harness.BenchConfig:
    common = dict(
        threads=args.threads,
        repetitions=args.reps,
        seed=args.seed,
        allocation_mode=_ALLOC_CHOICES[args.alloc],
        placement=args.placement,
        verify=args.verify,
        out=args.out,
        fmt=args.format,
        data_dir=args.data_dir,
    )
    if args.command == "join":
        return harness.BenchConfig(
            experiment="join", algo=args.algo, build_mb=args.build_mb,
            probe_mb=args.probe_mb, radix_bits=args.radix_bits,
            kernel_variant=args.kernel, queue_kind=args.queue,
            materialize=args.materialize, **common,
        )
    if args.command == "scan":
        return harness.BenchConfig(
            experiment="scan", size_mb=args.size_mb,
            selectivity=args.selectivity, materialize=args.materialize,
            **common,
        )
    if args.command == "micro":
        return harness.BenchConfig(
            experiment="micro", algo=args.name, size_mb=args.size_mb,
            width=args.width, steps=args.steps, **common,
        )
    return harness.BenchConfig(
        experiment="query", query_id=args.query, scale_factor=args.sf,
        algo=args.algo, radix_bits=args.radix_bits,
        kernel_variant=args.kernel, queue_kind=args.queue, **common,
    )


def _run_gen(args) -> int:
    directory = args.data_dir
    if not directory:
        print("gen needs --data-dir or OLAPBENCH_DATA_DIR", file=sys.stderr)
        return 1
    os.makedirs(directory, exist_ok=True)
    if args.kind == "pair":
        build_n = harness.tuples_of_mb(args.build_mb)
        probe_n = harness.tuples_of_mb(args.probe_mb)
        build, probe = generate_fk_pair(build_n, probe_n, args.seed)
        bpath, ppath = harness.pair_paths(directory, build_n, probe_n, args.seed)
        write_relation(bpath, build)
        write_relation(ppath, probe)
        print(bpath)
        print(ppath)
    else:
        db = generate_tpch_lite(args.sf, args.seed)
        path = harness.tpch_dir(directory, args.sf, args.seed)
        save_tpch_lite(db, path)
        print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _run_gen(args)
        config = _config_from(args)
        records = harness.run_experiment(config)
        harness.emit_results(records, config.out, config.fmt)
    except Exception as exc:
        print(f"olapbench: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
