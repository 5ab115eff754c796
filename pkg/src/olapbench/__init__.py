"""In-memory analytical query operators and a benchmark harness.

Parallel hash joins (shared-table, radix-partitioned, cracking-based),
SIMD column scans, memory-subsystem micro-benchmarks, work-distribution
primitives, and simplified TPC-H query plans, all driven by a CLI that
emits repetition-level CSV/JSON results.
"""

__version__ = "0.1.0"
