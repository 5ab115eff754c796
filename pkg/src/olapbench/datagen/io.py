"""On-disk formats: binary relation files and the columnar database layout.

Relation file = 16-byte header (magic ``OLAPREL1``, little-endian u64
cardinality) followed by the packed 8-byte tuples. A database directory
holds one raw little-endian u32 file per column plus ``manifest.json``
recording table, column, row count, and encoding dictionary.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..errors import FormatError
from .relations import TUPLE_DTYPE, Relation
from .tpch import DICTIONARIES, TpchLiteDB

MAGIC = b"OLAPREL1"
_HEADER = struct.Struct("<8sQ")

MANIFEST_NAME = "manifest.json"


def write_relation(path, rel: Relation) -> None:
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, rel.cardinality))
        f.write(rel.tuples.tobytes())


def read_relation(path) -> Relation:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, cardinality = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    body = len(blob) - _HEADER.size
    if body != cardinality * TUPLE_DTYPE.itemsize:
        raise FormatError(
            f"{path}: payload is {body} bytes, header promises {cardinality} tuples"
        )
    tuples = np.frombuffer(blob, dtype=TUPLE_DTYPE, offset=_HEADER.size).copy()
    return Relation(tuples)


def _column_filename(table: str, column: str) -> str:
    return f"{table}.{column}.bin"


def save_tpch_lite(db: TpchLiteDB, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    manifest = {"tables": {}}
    for table, columns in db.tables().items():
        rows = None
        cols = {}
        for name, values in columns.items():
            rows = len(values) if rows is None else rows
            fname = _column_filename(table, name)
            values.astype("<u4", copy=False).tofile(os.path.join(directory, fname))
            cols[name] = {
                "file": fname,
                "dictionary": list(DICTIONARIES.get(name, ())) or None,
            }
        manifest["tables"][table] = {"rows": rows, "columns": cols}
    with open(os.path.join(directory, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def load_tpch_lite(directory) -> TpchLiteDB:
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"{manifest_path}: unreadable manifest ({e})") from e

    loaded = {}
    for table, meta in manifest["tables"].items():
        rows = meta["rows"]
        columns = {}
        for name, col in meta["columns"].items():
            path = os.path.join(directory, col["file"])
            values = np.fromfile(path, dtype="<u4")
            if len(values) != rows:
                raise FormatError(
                    f"{path}: {len(values)} rows, manifest promises {rows}"
                )
            columns[name] = values
        loaded[table] = columns
    try:
        return TpchLiteDB(**loaded)
    except TypeError as e:
        raise FormatError(f"{manifest_path}: unexpected table set ({e})") from e
