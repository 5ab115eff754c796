"""Deterministic, seeded generation of benchmark inputs.

Foreign-key join relation pairs, uniform byte columns for predicate
scans, a simplified integer-only TPC-H-style database, and the binary
on-disk formats for all of them.
"""

from .io import (
    MAGIC,
    load_tpch_lite,
    read_relation,
    save_tpch_lite,
    write_relation,
)
from .relations import (
    TUPLE_DTYPE,
    Relation,
    generate_column,
    generate_fk_pair,
)
from .tpch import (
    BRAND,
    CONTAINER,
    DATE_DAYS,
    DICTIONARIES,
    MAX_QUANTITY,
    MAX_SIZE,
    MKTSEGMENT,
    RETURNFLAG,
    SHIPMODE,
    TpchLiteDB,
    generate_tpch_lite,
)

__all__ = [
    "BRAND",
    "CONTAINER",
    "DATE_DAYS",
    "DICTIONARIES",
    "MAGIC",
    "MAX_QUANTITY",
    "MAX_SIZE",
    "MKTSEGMENT",
    "RETURNFLAG",
    "SHIPMODE",
    "Relation",
    "TUPLE_DTYPE",
    "TpchLiteDB",
    "generate_column",
    "generate_fk_pair",
    "generate_tpch_lite",
    "load_tpch_lite",
    "read_relation",
    "save_tpch_lite",
    "write_relation",
]
