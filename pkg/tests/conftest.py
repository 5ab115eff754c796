"""Shared helpers: deterministic test relations and a sort-merge join oracle."""

import numpy as np

from olapbench import prng
from olapbench.datagen import Relation

OUT_DTYPE = np.dtype([("key", "<u4"), ("left", "<u4"), ("right", "<u4")])


def rand_relation(n, seed, key_bits=32):
    """Random relation; small key_bits forces duplicate keys."""
    keys = (prng.stream(seed, n) & ((1 << key_bits) - 1)).astype(np.uint32)
    payloads = (prng.stream(seed ^ 0x5EED, n) & 0xFFFFFFFF).astype(np.uint32)
    return Relation.from_arrays(keys, payloads)


def unique_key_relation(n, seed, universe=None):
    """Relation with n distinct keys drawn from 1..universe."""
    universe = universe or n
    assert universe >= n
    keys = (prng.permutation(universe, seed)[:n] + 1).astype(np.uint32)
    payloads = (prng.stream(seed ^ 0xFACE, n) & 0xFFFFFFFF).astype(np.uint32)
    return Relation.from_arrays(keys, payloads)


def join_oracle(build, probe):
    """Sort-merge equi-join; the build side must be key-unique."""
    assert len(np.unique(build.keys)) == build.cardinality
    out = np.empty(0, OUT_DTYPE)
    if build.cardinality == 0 or probe.cardinality == 0:
        return out
    order = np.argsort(build.keys, kind="stable")
    sk = build.keys[order]
    sp = build.payloads[order]
    pos = np.searchsorted(sk, probe.keys)
    pos_c = np.minimum(pos, len(sk) - 1)
    hit = sk[pos_c] == probe.keys
    out = np.empty(int(hit.sum()), OUT_DTYPE)
    out["key"] = probe.keys[hit]
    out["left"] = sp[pos_c[hit]]
    out["right"] = probe.payloads[hit]
    return out


def canon(out):
    """Materialized join output in canonical (sorted) order."""
    return np.sort(out, order=["key", "left", "right"])
