"""Command-line chart renderer for benchmark result CSV files."""

from __future__ import annotations

import argparse
import json
import sys

from .figspec import FigureSpec
from .presets import PRESETS, get_preset
from .render import render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plot",
        description="render a chart from a benchmark result CSV",
    )
    parser.add_argument("--csv", required=True, help="result CSV file")
    which = parser.add_mutually_exclusive_group(required=True)
    which.add_argument(
        "--preset", choices=sorted(PRESETS), help="bundled figure definition"
    )
    which.add_argument(
        "--spec", help="JSON file holding a custom figure definition"
    )
    parser.add_argument("--out", required=True, help="output image file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.preset:
            spec = get_preset(args.preset)
        else:
            with open(args.spec) as f:
                spec = FigureSpec.from_dict(json.load(f))
        render(args.csv, spec, args.out)
    except Exception as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
