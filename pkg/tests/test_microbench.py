"""Tests for memory micro-benchmarks: chase chains, random writes, linear sweeps."""

import numba
import numpy as np
import pytest

from olapbench import lowlevel, microbench
from olapbench.errors import CapabilityError
from olapbench.microbench import (
    LCG_INCREMENT,
    LCG_MULTIPLIER,
    WRITE_PATTERN,
    MicrobenchResult,
    build_chain,
    chase_chain,
    linear_read,
    linear_write,
    random_writes,
)
from olapbench.prng import mix64_int

MASK64 = (1 << 64) - 1


def chain_cycle_length(slots):
    """Walk the chain from slot 0 and count steps until it returns."""
    seen = 0
    pos = 0
    while True:
        pos = int(slots[pos])
        seen += 1
        if pos == 0:
            return seen
        if seen > len(slots):
            pytest.fail("chain does not return to its start")


class TestChain:
    def test_chain_is_single_full_cycle(self):
        for n in (1, 2, 64, 1024):
            chain = build_chain(n, seed=7)
            assert chain.length == n
            assert chain_cycle_length(chain.slots) == n

    def test_chain_is_a_permutation(self):
        chain = build_chain(512, seed=3)
        assert sorted(chain.slots.tolist()) == list(range(512))

    def test_chain_deterministic(self):
        a = build_chain(256, seed=11)
        b = build_chain(256, seed=11)
        c = build_chain(256, seed=12)
        assert np.array_equal(a.slots, b.slots)
        assert not np.array_equal(a.slots, c.slots)

    def test_chase_zero_steps(self):
        res = chase_chain(array_bytes=4096, steps=0, seed=1)
        assert res.op_count == 0
        assert res.name == "chase_chain"
        assert np.isnan(res.ns_per_op)

    def test_chase_final_position(self):
        res = chase_chain(array_bytes=64, steps=10, seed=5)
        assert res.op_count == 10
        assert res.bytes_touched == 80
        pos = 0
        chain = build_chain(8, seed=5)
        for _ in range(10):
            pos = int(chain.slots[pos])
        assert res.checksum == pos
        assert res.elapsed_ns > 0

    def test_chase_rejects_bad_sizes(self):
        for bad in (0, 12, 56):
            with pytest.raises(ValueError):
                chase_chain(array_bytes=bad, steps=1, seed=0)
        with pytest.raises(ValueError):
            chase_chain(array_bytes=64, steps=-1, seed=0)

    @pytest.mark.slow
    def test_chase_latency_ordering(self):
        # a 32 KiB chain resolves in cache; a 128 MiB chain cannot
        def best_ns_per_op(array_bytes):
            return min(
                chase_chain(array_bytes, steps=200_000, seed=9).ns_per_op
                for _ in range(3)
            )

        small = best_ns_per_op(32 * 1024)
        large = best_ns_per_op(128 * 1024 * 1024)
        assert large > small


def lcg_replay(slot_count, writes, seed, addr_mask=None):
    """Replay the congruential write stream in plain Python.

    Returns the expected final array contents and the last LCG value."""
    arr = [0] * slot_count
    shift = 64 - max(1, slot_count.bit_length() - 1)
    mask = slot_count - 1 if addr_mask is None else addr_mask
    x = mix64_int(seed)
    for _ in range(writes):
        x = (x * int(LCG_MULTIPLIER) + int(LCG_INCREMENT)) & MASK64
        arr[(x >> shift) & mask] = x
    return arr, x


def run_write_kernel(slot_count, writes, seed, addr_mask=None):
    """Drive the store kernel directly so the array can be inspected."""
    arr = np.zeros(slot_count, dtype=np.uint64)
    shift = np.uint64(64 - max(1, slot_count.bit_length() - 1))
    mask = np.uint64(slot_count - 1 if addr_mask is None else addr_mask)
    x = microbench._random_writes(
        arr, writes, np.uint64(mix64_int(seed)), shift, mask
    )
    return arr, int(x)


class TestRandomWrites:
    def test_checksum_matches_replay(self):
        res = random_writes(array_bytes=64 * 8, writes=500, seed=21)
        assert res.op_count == 500
        assert res.bytes_touched == 4000
        assert res.checksum == lcg_replay(64, 500, seed=21)[1]

    def test_kernel_array_matches_replay(self):
        arr, x = run_write_kernel(64, 500, seed=21)
        want_arr, want_x = lcg_replay(64, 500, seed=21)
        assert arr.tolist() == want_arr
        assert x == want_x

    def test_single_slot_array(self):
        arr, x = run_write_kernel(1, 10, seed=1)
        assert arr.tolist() == [x]

    def test_addr_mask_restricts_slots(self):
        arr, _ = run_write_kernel(256, 2000, seed=33, addr_mask=0x0F)
        assert np.flatnonzero(arr).max() <= 0x0F
        assert arr.tolist() == lcg_replay(256, 2000, 33, addr_mask=0x0F)[0]

    def test_deterministic(self):
        a = random_writes(array_bytes=1024, writes=100, seed=5)
        b = random_writes(array_bytes=1024, writes=100, seed=5)
        assert a.checksum == b.checksum

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            random_writes(array_bytes=24, writes=1, seed=0)

    def test_rejects_bad_mask(self):
        with pytest.raises(ValueError):
            random_writes(array_bytes=64 * 8, writes=1, seed=0, addr_mask=6)
        with pytest.raises(ValueError):
            random_writes(array_bytes=64 * 8, writes=1, seed=0, addr_mask=255)

    def test_metrics(self):
        res = random_writes(array_bytes=4096, writes=1000, seed=2)
        assert res.ns_per_op == pytest.approx(res.elapsed_ns / 1000)


class TestLinearSweeps:
    @pytest.mark.parametrize("width", [64, 512])
    def test_read_checksum_identity(self, width):
        if width == 512 and not lowlevel.has_avx512():
            pytest.skip("needs avx512")
        array_bytes = 1 << 16
        res = linear_read(array_bytes=array_bytes, width=width, threads=1)
        n = array_bytes // 8
        sweeps = res.bytes_touched // array_bytes
        assert sweeps >= 1
        assert res.op_count == sweeps * array_bytes // (width // 8)
        per_sweep = (n * (n - 1) // 2) & MASK64
        assert res.checksum == (per_sweep * sweeps) & MASK64

    def test_multithreaded_read(self):
        array_bytes = 1 << 16
        res = linear_read(array_bytes=array_bytes, width=64, threads=2)
        n = array_bytes // 8
        per_sweep = (n * (n - 1) // 2) & MASK64
        sweeps = res.bytes_touched // array_bytes
        assert res.checksum == (per_sweep * sweeps) & MASK64

    def test_write_verifies_pattern(self):
        res = linear_write(array_bytes=1 << 14, width=64, threads=1)
        assert res.op_count >= (1 << 14) // 8
        assert res.bytes_touched == res.op_count * 8

    def test_gb_per_s_consistent(self):
        res = linear_read(array_bytes=1 << 16, width=64, threads=1)
        assert res.gb_per_s == pytest.approx(
            res.bytes_touched / res.elapsed_ns, rel=1e-9
        )

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError):
            linear_read(array_bytes=4096, width=128, threads=1)
        with pytest.raises(ValueError):
            linear_write(array_bytes=4096, width=256, threads=1)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            linear_read(array_bytes=100, width=64, threads=1)
        with pytest.raises(ValueError):
            linear_read(array_bytes=1 << 14, width=64, threads=0)
        with pytest.raises(ValueError):
            # 96 bytes is not a multiple of one 512-bit line
            linear_read(array_bytes=96, width=512, threads=1)

    def test_wide_ops_need_avx512(self, monkeypatch):
        monkeypatch.setattr(lowlevel, "has_avx512", lambda: False)
        with pytest.raises(CapabilityError):
            linear_read(array_bytes=4096, width=512, threads=1)
        with pytest.raises(CapabilityError):
            linear_write(array_bytes=4096, width=512, threads=1)

    @pytest.mark.skipif(not lowlevel.has_avx512(), reason="needs avx512")
    def test_wide_kernels_emit_zmm(self):
        linear_read(array_bytes=4096, width=512, threads=1)
        linear_write(array_bytes=4096, width=512, threads=1)
        assert "zmm" in asm_of(microbench._read512)
        assert "zmm" in asm_of(microbench._write512)

    def test_scalar_kernel_stays_scalar(self):
        linear_read(array_bytes=4096, width=64, threads=1)
        assert "zmm" not in asm_of(microbench._read64)

    @pytest.mark.slow
    def test_bandwidth_ordering(self):
        # a cache-resident sweep against a memory-bound one
        small = max(
            linear_read(array_bytes=16 * 1024, width=64, threads=1).gb_per_s
            for _ in range(3)
        )
        large = max(
            linear_read(array_bytes=256 * 1024 * 1024, width=64, threads=1).gb_per_s
            for _ in range(3)
        )
        assert small > large


def asm_of(fn):
    """Disassembly of every compiled signature. Code loaded from the
    on-disk cache cannot be inspected, so recompile a fresh twin."""
    text = "".join(fn.inspect_asm().values())
    if ".globl" not in text:
        twin = numba.njit(nogil=True)(fn.py_func)
        for sig in fn.signatures:
            twin.compile(sig)
        text = "".join(twin.inspect_asm().values())
    return text


class TestResultType:
    def test_zero_guards(self):
        r = MicrobenchResult(name="x", op_count=0, elapsed_ns=0.0, bytes_touched=0)
        assert np.isnan(r.ns_per_op)
        assert np.isnan(r.gb_per_s)

    def test_pattern_constant(self):
        assert int(WRITE_PATTERN) == 0x5A5A5A5A5A5A5A5A
