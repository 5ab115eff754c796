"""Simplified integer-only TPC-H-style database generator.

Four column-oriented tables (customer, orders, lineitem, part) whose
columns are all 32-bit integers: dates count days since 1992-01-01 over
a uniform 7-year range, categorical strings are dictionary-encoded with
the dictionaries below, and keys are dense 1..N with uniform foreign
keys. Columns are uniform and independent; the skew and text of full
TPC-H are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import prng

DATE_DAYS = 2557  # 1992-01-01 .. 1998-12-31, inclusive, in days

MKTSEGMENT = ("AUTOMOBILE", "BUILDING", "FURNITURE", "MACHINERY", "HOUSEHOLD")
RETURNFLAG = ("R", "A", "N")
SHIPMODE = ("REG AIR", "AIR", "RAIL", "SHIP", "TRUCK", "MAIL", "FOB")
BRAND = tuple(f"Brand#{i}{j}" for i in range(1, 6) for j in range(1, 6))
CONTAINER = tuple(
    f"{size} {kind}"
    for size in ("SM", "LG", "MED", "JUMBO", "WRAP")
    for kind in ("CASE", "BOX", "BAG", "JAR", "PKG", "PACK", "CAN", "DRUM")
)

# column name -> encoding dictionary (value i encodes dictionary[i])
DICTIONARIES = {
    "c_mktsegment": MKTSEGMENT,
    "l_returnflag": RETURNFLAG,
    "l_shipmode": SHIPMODE,
    "p_brand": BRAND,
    "p_container": CONTAINER,
}

MAX_QUANTITY = 50
MAX_SIZE = 50

_BASE_ROWS = {"customer": 150_000, "orders": 1_500_000, "part": 200_000}
_MAX_LINES_PER_ORDER = 7


@dataclass(frozen=True)
class TpchLiteDB:
    """Column-oriented tables; every column is a uint32 array."""

    customer: dict[str, np.ndarray]
    orders: dict[str, np.ndarray]
    lineitem: dict[str, np.ndarray]
    part: dict[str, np.ndarray]

    def tables(self) -> dict[str, dict[str, np.ndarray]]:
        return {
            "customer": self.customer,
            "orders": self.orders,
            "lineitem": self.lineitem,
            "part": self.part,
        }


def _u32(a: np.ndarray) -> np.ndarray:
    return a.astype(np.uint32)


def _draw(seed: int, label: int, n: int, bound: int) -> np.ndarray:
    return _u32(prng.uniform_below(prng.substream_seed(seed, label), n, bound))


def generate_tpch_lite(scale_factor: float, seed: int) -> TpchLiteDB:
    """Seeded FK-closed database scaled linearly by scale_factor."""
    if scale_factor <= 0:
        raise ValueError("scale factor must be positive")

    n_customer = int(round(_BASE_ROWS["customer"] * scale_factor))
    n_orders = int(round(_BASE_ROWS["orders"] * scale_factor))
    n_part = int(round(_BASE_ROWS["part"] * scale_factor))
    if min(n_customer, n_orders, n_part) < 1:
        raise ValueError("scale factor too small, a table would be empty")

    customer = {
        "c_custkey": _u32(np.arange(1, n_customer + 1)),
        "c_mktsegment": _draw(seed, 1, n_customer, len(MKTSEGMENT)),
    }

    orders = {
        "o_orderkey": _u32(np.arange(1, n_orders + 1)),
        "o_custkey": _draw(seed, 2, n_orders, n_customer) + np.uint32(1),
        "o_orderdate": _draw(seed, 3, n_orders, DATE_DAYS),
    }

    # 1..7 lines per order, so lineitem cardinality is about 4x orders
    lines_per_order = _draw(seed, 4, n_orders, _MAX_LINES_PER_ORDER) + np.uint32(1)
    n_lineitem = int(lines_per_order.sum())
    lineitem = {
        "l_orderkey": np.repeat(orders["o_orderkey"], lines_per_order),
        "l_partkey": _draw(seed, 5, n_lineitem, n_part) + np.uint32(1),
        "l_quantity": _draw(seed, 6, n_lineitem, MAX_QUANTITY) + np.uint32(1),
        "l_shipdate": _draw(seed, 7, n_lineitem, DATE_DAYS),
        "l_commitdate": _draw(seed, 8, n_lineitem, DATE_DAYS),
        "l_receiptdate": _draw(seed, 9, n_lineitem, DATE_DAYS),
        "l_returnflag": _draw(seed, 10, n_lineitem, len(RETURNFLAG)),
        "l_shipmode": _draw(seed, 11, n_lineitem, len(SHIPMODE)),
    }

    part = {
        "p_partkey": _u32(np.arange(1, n_part + 1)),
        "p_brand": _draw(seed, 12, n_part, len(BRAND)),
        "p_container": _draw(seed, 13, n_part, len(CONTAINER)),
        "p_size": _draw(seed, 14, n_part, MAX_SIZE) + np.uint32(1),
    }

    return TpchLiteDB(customer=customer, orders=orders, lineitem=lineitem, part=part)
