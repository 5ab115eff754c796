"""Regenerate the golden result CSV the plot tests render from.

Runs a battery of small benchmark configurations through the
`olapbench` CLI (which must be installed) and concatenates their CSV
outputs under a single header. The battery covers every bundled
preset: the three join algorithms, the kernel sweep, both queues, both
allocation modes, a scan thread sweep, and all four queries.

Usage: python3 make_golden.py [OUT_CSV]
"""

from __future__ import annotations

import subprocess
import sys
import tempfile
from pathlib import Path

JOIN = ["join", "--build-mb", "0.25", "--probe-mb", "1",
        "--radix-bits", "5,5", "--threads", "2", "--materialize"]

BATTERY = [
    *[[*JOIN, "--algo", algo] for algo in ("pht", "rho", "crk")],
    *[[*JOIN, "--algo", algo, "--kernel", kernel]
      for algo in ("pht", "rho")
      for kernel in ("unrolled8", "simd32")],
    [*JOIN, "--algo", "rho", "--queue", "mutex"],
    [*JOIN, "--algo", "rho", "--alloc", "lazy"],
    *[["scan", "--size-mb", "1", "--selectivity", "0.5",
       "--threads", str(threads)] for threads in (1, 2, 4)],
    *[["query", "--query", str(query), "--sf", "0.001", "--threads", "2"]
      for query in (3, 10, 12, 19)],
]


def main() -> int:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else
               Path(__file__).parent.parent / "tests" / "golden.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, run in enumerate(BATTERY):
            part = Path(tmp) / f"{i}.csv"
            cmd = [sys.executable, "-m", "olapbench.cli", *run,
                   "--reps", "3", "--seed", "1", "--out", str(part)]
            print(" ".join(run), file=sys.stderr)
            subprocess.run(cmd, check=True)
            part_lines = part.read_text().splitlines()
            lines.extend(part_lines if not lines else part_lines[1:])
    out.write_text("\n".join(lines) + "\n")
    print(f"{out}: {len(lines)} lines from {len(BATTERY)} runs")
    return 0


if __name__ == "__main__":
    sys.exit(main())
