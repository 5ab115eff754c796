"""Simplified TPC-H-style database: scaling, closure, encodings, storage."""

import json

import numpy as np
import pytest

from olapbench import datagen
from olapbench.errors import FormatError


@pytest.fixture(scope="module")
def db_01():
    return datagen.generate_tpch_lite(0.1, seed=42)


def test_linear_scaling():
    db = datagen.generate_tpch_lite(0.01, seed=1)
    assert len(db.customer["c_custkey"]) == 1500
    assert len(db.orders["o_orderkey"]) == 15000
    assert len(db.part["p_partkey"]) == 2000


def test_lineitem_cardinality(db_01):
    # 1..7 lines per order, mean 4: about 600k lines at this scale
    n = len(db_01.lineitem["l_orderkey"])
    assert abs(n - 600_000) < 5_000


def test_fk_closure(db_01):
    orders, lineitem = db_01.orders, db_01.lineitem
    assert np.isin(orders["o_custkey"], db_01.customer["c_custkey"]).all()
    assert np.isin(lineitem["l_orderkey"], orders["o_orderkey"]).all()
    assert np.isin(lineitem["l_partkey"], db_01.part["p_partkey"]).all()


def test_q12_shipmode_filter_selectivity(db_01):
    # two of the seven shipmode values
    mode = db_01.lineitem["l_shipmode"]
    hits = np.count_nonzero((mode == 0) | (mode == 1))
    assert abs(hits / len(mode) - 2 / 7) <= 0.01


def test_dictionary_sizes():
    assert len(datagen.MKTSEGMENT) == 5
    assert len(datagen.RETURNFLAG) == 3
    assert len(datagen.SHIPMODE) == 7
    assert len(datagen.BRAND) == 25
    assert len(datagen.CONTAINER) == 40
    assert len(set(datagen.BRAND)) == 25
    assert len(set(datagen.CONTAINER)) == 40


def test_value_ranges(db_01):
    li = db_01.lineitem
    for col in ("l_shipdate", "l_commitdate", "l_receiptdate"):
        assert int(li[col].max()) < datagen.DATE_DAYS
    assert int(db_01.orders["o_orderdate"].max()) < datagen.DATE_DAYS
    assert 1 <= int(li["l_quantity"].min()) <= int(li["l_quantity"].max()) <= 50
    assert 1 <= int(db_01.part["p_size"].min())
    assert int(db_01.part["p_size"].max()) <= 50
    assert int(li["l_returnflag"].max()) < 3
    assert int(li["l_shipmode"].max()) < 7
    assert int(db_01.part["p_brand"].max()) < 25
    assert int(db_01.part["p_container"].max()) < 40


def test_deterministic():
    a = datagen.generate_tpch_lite(0.01, seed=9)
    b = datagen.generate_tpch_lite(0.01, seed=9)
    c = datagen.generate_tpch_lite(0.01, seed=10)
    for name, cols in a.tables().items():
        for col, values in cols.items():
            assert np.array_equal(values, b.tables()[name][col]), (name, col)
    assert not np.array_equal(a.orders["o_orderdate"], c.orders["o_orderdate"])


def test_bad_scale_rejected():
    with pytest.raises(ValueError):
        datagen.generate_tpch_lite(0.0, seed=1)
    with pytest.raises(ValueError):
        datagen.generate_tpch_lite(-1, seed=1)


def test_save_load_round_trip(tmp_path):
    db = datagen.generate_tpch_lite(0.01, seed=5)
    datagen.save_tpch_lite(db, tmp_path)
    back = datagen.load_tpch_lite(tmp_path)
    for name, cols in db.tables().items():
        for col, values in cols.items():
            loaded = back.tables()[name][col]
            assert loaded.dtype == np.uint32
            assert np.array_equal(values, loaded), (name, col)


def test_manifest_records_dictionaries(tmp_path):
    datagen.save_tpch_lite(datagen.generate_tpch_lite(0.01, seed=5), tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    seg = manifest["tables"]["customer"]["columns"]["c_mktsegment"]
    assert seg["dictionary"] == list(datagen.MKTSEGMENT)
    key = manifest["tables"]["customer"]["columns"]["c_custkey"]
    assert key["dictionary"] is None


def test_load_detects_row_count_mismatch(tmp_path):
    datagen.save_tpch_lite(datagen.generate_tpch_lite(0.01, seed=5), tmp_path)
    manifest_path = tmp_path / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["tables"]["customer"]["rows"] += 1
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(FormatError):
        datagen.load_tpch_lite(tmp_path)


def test_load_rejects_garbage_manifest(tmp_path):
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(FormatError):
        datagen.load_tpch_lite(tmp_path)
