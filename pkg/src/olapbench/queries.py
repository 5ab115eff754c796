"""Four simplified analytical queries over the integer TPC-H-style tables.

Each query is a fixed plan of vectorized filters, hash joins, and a
final count. Operators run one at a time, each fully materializing its
output before the next starts, and each operator's wall time is recorded
separately. Joins build on the key-unique side; the count for the
three-table plans happens inside the final probe, so the trailing count
operator only reads it out.

Predicate constants (dates are day numbers since 1992-01-01):

  3   customer.mktsegment = BUILDING
      orders.orderdate < 1169 (1995-03-15), lineitem.shipdate > 1169
      customer x orders on custkey, then x lineitem on orderkey
  10  orders.orderdate in [639, 731) (1993-10-01 .. 1994-01-01)
      lineitem.returnflag = R
      customer x orders on custkey, then x lineitem on orderkey
  12  lineitem.shipmode in {MAIL, SHIP}
      lineitem.receiptdate in [731, 1096) (1994-01-01 .. 1995-01-01)
      lineitem.commitdate < receiptdate, lineitem.shipdate < commitdate
      orders x lineitem on orderkey
  19  part x lineitem on partkey with lineitem.shipmode in {AIR, REG AIR}
      and quantity in [1, 30], then one residual alternative must hold:
        Brand#12, container SM  {CASE, BOX, PACK, PKG}, quantity 1..11,  size 1..5
        Brand#23, container MED {BAG, BOX, PKG, PACK},  quantity 10..20, size 1..10
        Brand#34, container LG  {CASE, BOX, PACK, PKG}, quantity 20..30, size 1..15

reference_count answers the same questions with brute-force nested
loops (linear key search, no hash tables) as an independent oracle for
small scale factors.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

import numpy as np
from numba import njit

from .datagen.relations import Relation
from .datagen.tpch import BRAND, CONTAINER, MKTSEGMENT, RETURNFLAG, SHIPMODE, TpchLiteDB
from .joins import OUT_DTYPE, JoinOptions, JoinResult, pht_join, rho_join
from .timing import elapsed_ns, get_timer, start

QUERY_IDS = (3, 10, 12, 19)
JOIN_KINDS = ("rho", "pht")

_EPOCH = datetime.date(1992, 1, 1)


def _day(year: int, month: int, dom: int) -> int:
    return (datetime.date(year, month, dom) - _EPOCH).days


_Q3_DATE = _day(1995, 3, 15)
_Q10_LO = _day(1993, 10, 1)
_Q10_HI = _day(1994, 1, 1)
_Q12_LO = _day(1994, 1, 1)
_Q12_HI = _day(1995, 1, 1)

_SEG_BUILDING = MKTSEGMENT.index("BUILDING")
_FLAG_R = RETURNFLAG.index("R")
_MODE_MAIL = SHIPMODE.index("MAIL")
_MODE_SHIP = SHIPMODE.index("SHIP")
_MODE_AIR = SHIPMODE.index("AIR")
_MODE_REG_AIR = SHIPMODE.index("REG AIR")

_B12 = BRAND.index("Brand#12")
_B23 = BRAND.index("Brand#23")
_B34 = BRAND.index("Brand#34")
_Q19_BRANDS = np.array([_B12, _B23, _B34], np.uint32)
_Q19_MODES = np.array([_MODE_AIR, _MODE_REG_AIR], np.uint32)


def _container_set(names: tuple[str, ...]) -> np.ndarray:
    ok = np.zeros(len(CONTAINER), np.bool_)
    for name in names:
        ok[CONTAINER.index(name)] = True
    return ok


_SM_OK = _container_set(("SM CASE", "SM BOX", "SM PACK", "SM PKG"))
_MED_OK = _container_set(("MED BAG", "MED BOX", "MED PKG", "MED PACK"))
_LG_OK = _container_set(("LG CASE", "LG BOX", "LG PACK", "LG PKG"))


@dataclass(frozen=True)
class QueryPlan:
    """Ordered operator names of one query's fixed plan."""

    operators: tuple[str, ...]


QUERY_PLANS = {
    3: QueryPlan(
        (
            "filter_customer",
            "filter_orders",
            "join_customer_orders",
            "filter_lineitem",
            "join_orders_lineitem",
            "count",
        )
    ),
    10: QueryPlan(
        (
            "filter_orders",
            "join_customer_orders",
            "filter_lineitem",
            "join_orders_lineitem",
            "count",
        )
    ),
    12: QueryPlan(("filter_lineitem", "join_orders_lineitem", "count")),
    19: QueryPlan(
        (
            "filter_part",
            "filter_lineitem",
            "join_part_lineitem",
            "residual_filter",
            "count",
        )
    ),
}


@dataclass(frozen=True)
class QueryResult:
    query_id: int
    count: int
    operator_ns: dict[str, int]
    elapsed_ns: int


class _Recorder:
    """Runs plan operators one by one, recording each one's wall time."""

    def __init__(self):
        self.timer = get_timer()
        self.operator_ns: dict[str, int] = {}

    def run(self, name, fn):
        token = start(self.timer)
        out = fn()
        self.operator_ns[name] = elapsed_ns(self.timer, token)
        return out


def _make_join(threads, join_kind, kernel_variant, queue_kind):
    """Configured join closure: (bkeys, bpays, pkeys, ppays, materialize)."""
    fn = {"rho": rho_join, "pht": pht_join}[join_kind]

    def jn(bkeys, bpays, pkeys, ppays, materialize):
        if len(bkeys) == 0 or len(pkeys) == 0:
            output = np.empty(0, OUT_DTYPE) if materialize else None
            return JoinResult(
                match_count=0, output=output, phase_times={}, elapsed_ns=0
            )
        # deepest split the partition budget allows, capped at 7+7 bits
        total = min(14, len(bkeys).bit_length() - 1)
        opts = JoinOptions(
            threads=threads,
            radix_bits_pass1=(total + 1) // 2,
            radix_bits_pass2=total // 2,
            kernel_variant=kernel_variant,
            queue_kind=queue_kind,
            materialize=materialize,
        )
        build = Relation.from_arrays(bkeys, bpays)
        probe = Relation.from_arrays(pkeys, ppays)
        return fn(build, probe, opts)

    return jn


def _q3(db, jn, rec):
    c, o, li = db.customer, db.orders, db.lineitem
    ckeys = rec.run(
        "filter_customer",
        lambda: c["c_custkey"][c["c_mktsegment"] == _SEG_BUILDING],
    )

    def filter_orders():
        keep = o["o_orderdate"] < _Q3_DATE
        return o["o_custkey"][keep], o["o_orderkey"][keep]

    o_cust, o_key = rec.run("filter_orders", filter_orders)
    r1 = rec.run("join_customer_orders", lambda: jn(ckeys, ckeys, o_cust, o_key, True))
    okeys = r1.output["right"]
    lkeys = rec.run(
        "filter_lineitem", lambda: li["l_orderkey"][li["l_shipdate"] > _Q3_DATE]
    )
    r2 = rec.run("join_orders_lineitem", lambda: jn(okeys, okeys, lkeys, lkeys, False))
    return rec.run("count", lambda: int(r2.match_count))


def _q10(db, jn, rec):
    c, o, li = db.customer, db.orders, db.lineitem

    def filter_orders():
        d = o["o_orderdate"]
        keep = (d >= _Q10_LO) & (d < _Q10_HI)
        return o["o_custkey"][keep], o["o_orderkey"][keep]

    o_cust, o_key = rec.run("filter_orders", filter_orders)
    # build on customer: the key-unique side of the custkey join
    ckeys = c["c_custkey"]
    r1 = rec.run("join_customer_orders", lambda: jn(ckeys, ckeys, o_cust, o_key, True))
    okeys = r1.output["right"]
    lkeys = rec.run(
        "filter_lineitem", lambda: li["l_orderkey"][li["l_returnflag"] == _FLAG_R]
    )
    r2 = rec.run("join_orders_lineitem", lambda: jn(okeys, okeys, lkeys, lkeys, False))
    return rec.run("count", lambda: int(r2.match_count))


def _q12(db, jn, rec):
    o, li = db.orders, db.lineitem

    def filter_lineitem():
        mode = li["l_shipmode"]
        receipt = li["l_receiptdate"]
        keep = (
            ((mode == _MODE_MAIL) | (mode == _MODE_SHIP))
            & (receipt >= _Q12_LO)
            & (receipt < _Q12_HI)
            & (li["l_commitdate"] < receipt)
            & (li["l_shipdate"] < li["l_commitdate"])
        )
        return li["l_orderkey"][keep]

    lkeys = rec.run("filter_lineitem", filter_lineitem)
    okeys = o["o_orderkey"]
    r1 = rec.run("join_orders_lineitem", lambda: jn(okeys, okeys, lkeys, lkeys, False))
    return rec.run("count", lambda: int(r1.match_count))


def _q19(db, jn, rec):
    p, li = db.part, db.lineitem

    def filter_part():
        keep = np.isin(p["p_brand"], _Q19_BRANDS)
        return p["p_partkey"][keep], np.flatnonzero(keep).astype(np.uint32)

    p_key, p_row = rec.run("filter_part", filter_part)

    def filter_lineitem():
        qty = li["l_quantity"]
        keep = np.isin(li["l_shipmode"], _Q19_MODES) & (qty >= 1) & (qty <= 30)
        return li["l_partkey"][keep], np.flatnonzero(keep).astype(np.uint32)

    l_key, l_row = rec.run("filter_lineitem", filter_lineitem)
    r1 = rec.run("join_part_lineitem", lambda: jn(p_key, p_row, l_key, l_row, True))

    def residual():
        # row ids travel through the join as payloads: left = part row,
        # right = lineitem row
        brand = p["p_brand"][r1.output["left"]]
        cont = p["p_container"][r1.output["left"]]
        size = p["p_size"][r1.output["left"]]
        qty = li["l_quantity"][r1.output["right"]]
        d12 = (
            (brand == _B12)
            & _SM_OK[cont]
            & (qty >= 1)
            & (qty <= 11)
            & (size >= 1)
            & (size <= 5)
        )
        d23 = (
            (brand == _B23)
            & _MED_OK[cont]
            & (qty >= 10)
            & (qty <= 20)
            & (size >= 1)
            & (size <= 10)
        )
        d34 = (
            (brand == _B34)
            & _LG_OK[cont]
            & (qty >= 20)
            & (qty <= 30)
            & (size >= 1)
            & (size <= 15)
        )
        return d12 | d23 | d34

    keep = rec.run("residual_filter", residual)
    return rec.run("count", lambda: int(keep.sum()))


_EXECUTORS = {3: _q3, 10: _q10, 12: _q12, 19: _q19}


def run_query(
    query_id: int,
    db: TpchLiteDB,
    threads: int = 1,
    join_kind: str = "rho",
    kernel_variant: str = "naive",
    queue_kind: str = "lockfree",
) -> QueryResult:
    """Run one query plan and return its count and operator times.

    The count is invariant under threads, join_kind, kernel_variant,
    and queue_kind; only the timings change.
    """
    if query_id not in _EXECUTORS:
        raise ValueError(f"unknown query id {query_id}, have {QUERY_IDS}")
    if join_kind not in JOIN_KINDS:
        raise ValueError(f"join_kind must be one of {JOIN_KINDS}, got {join_kind!r}")
    jn = _make_join(threads, join_kind, kernel_variant, queue_kind)
    rec = _Recorder()
    token = start(rec.timer)
    count = _EXECUTORS[query_id](db, jn, rec)
    total = elapsed_ns(rec.timer, token)
    return QueryResult(
        query_id=query_id, count=count, operator_ns=rec.operator_ns, elapsed_ns=total
    )


@njit(nogil=True, cache=True)
def _ref_q3(c_key, c_seg, o_key, o_cust, o_date, l_okey, l_ship, seg, cutoff):
    total = 0
    for i in range(len(l_okey)):
        if l_ship[i] <= cutoff:
            continue
        okey = l_okey[i]
        for j in range(len(o_key)):
            if o_key[j] == okey and o_date[j] < cutoff:
                cust = o_cust[j]
                for k in range(len(c_key)):
                    if c_key[k] == cust and c_seg[k] == seg:
                        total += 1
    return total


@njit(nogil=True, cache=True)
def _ref_q10(c_key, o_key, o_cust, o_date, l_okey, l_flag, flag, lo, hi):
    total = 0
    for i in range(len(l_okey)):
        if l_flag[i] != flag:
            continue
        okey = l_okey[i]
        for j in range(len(o_key)):
            if o_key[j] == okey and o_date[j] >= lo and o_date[j] < hi:
                cust = o_cust[j]
                for k in range(len(c_key)):
                    if c_key[k] == cust:
                        total += 1
    return total


@njit(nogil=True, cache=True)
def _ref_q12(o_key, l_okey, l_mode, l_ship, l_commit, l_receipt, m1, m2, lo, hi):
    total = 0
    for i in range(len(l_okey)):
        mode = l_mode[i]
        if mode != m1 and mode != m2:
            continue
        receipt = l_receipt[i]
        if receipt < lo or receipt >= hi:
            continue
        if l_commit[i] >= receipt or l_ship[i] >= l_commit[i]:
            continue
        okey = l_okey[i]
        for j in range(len(o_key)):
            if o_key[j] == okey:
                total += 1
    return total


@njit(nogil=True, cache=True)
def _ref_q19(
    l_part, l_qty, l_mode, p_key, p_brand, p_cont, p_size,
    mode_a, mode_b, b12, b23, b34, sm_ok, med_ok, lg_ok,
):
    total = 0
    for i in range(len(l_part)):
        mode = l_mode[i]
        if mode != mode_a and mode != mode_b:
            continue
        pkey = l_part[i]
        qty = l_qty[i]
        for j in range(len(p_key)):
            if p_key[j] != pkey:
                continue
            brand = p_brand[j]
            size = p_size[j]
            hit_12 = (
                brand == b12 and sm_ok[p_cont[j]]
                and qty >= 1 and qty <= 11 and size >= 1 and size <= 5
            )
            hit_23 = (
                brand == b23 and med_ok[p_cont[j]]
                and qty >= 10 and qty <= 20 and size >= 1 and size <= 10
            )
            hit_34 = (
                brand == b34 and lg_ok[p_cont[j]]
                and qty >= 20 and qty <= 30 and size >= 1 and size <= 15
            )
            if hit_12 or hit_23 or hit_34:
                total += 1
    return total


def reference_count(query_id: int, db: TpchLiteDB) -> int:
    """Brute-force nested-loop answer to the same query, for small inputs.

    Key lookups are linear scans, so runtime is quadratic in table size;
    meant as an independent oracle, not a baseline.
    """
    c, o, li, p = db.customer, db.orders, db.lineitem, db.part
    if query_id == 3:
        return int(
            _ref_q3(
                c["c_custkey"], c["c_mktsegment"],
                o["o_orderkey"], o["o_custkey"], o["o_orderdate"],
                li["l_orderkey"], li["l_shipdate"],
                _SEG_BUILDING, _Q3_DATE,
            )
        )
    if query_id == 10:
        return int(
            _ref_q10(
                c["c_custkey"],
                o["o_orderkey"], o["o_custkey"], o["o_orderdate"],
                li["l_orderkey"], li["l_returnflag"],
                _FLAG_R, _Q10_LO, _Q10_HI,
            )
        )
    if query_id == 12:
        return int(
            _ref_q12(
                o["o_orderkey"],
                li["l_orderkey"], li["l_shipmode"], li["l_shipdate"],
                li["l_commitdate"], li["l_receiptdate"],
                _MODE_MAIL, _MODE_SHIP, _Q12_LO, _Q12_HI,
            )
        )
    if query_id == 19:
        return int(
            _ref_q19(
                li["l_partkey"], li["l_quantity"], li["l_shipmode"],
                p["p_partkey"], p["p_brand"], p["p_container"], p["p_size"],
                _MODE_AIR, _MODE_REG_AIR, _B12, _B23, _B34,
                _SM_OK, _MED_OK, _LG_OK,
            )
        )
    raise ValueError(f"unknown query id {query_id}, have {QUERY_IDS}")
