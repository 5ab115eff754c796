"""Low-level compiled primitives used inside the hot kernels.

numba intrinsics emitting LLVM IR directly:

* byte-wide atomic exchange / release store, the spin-latch primitive for
  parallel hash-table builds;
* monotonic-atomic 64-bit loads and stores: on x86 these compile to plain
  ``movq`` but the atomic ordering pins the access width, so the optimizer
  can neither widen them into vector accesses nor elide them -- the
  equivalent of hand-written assembly loops in a memory benchmark;
* ``<8 x i64>`` vector loads/stores that compile to single 512-bit
  instructions on AVX-512 hosts;
* a 64-lane byte range compare returning a 64-bit match mask, the scan
  primitive (one masked compare pair on AVX-512BW, narrower compares
  plus mask extraction on older ISAs -- always 64 values per step);
* a cycle-counter read (``llvm.readcyclecounter``, i.e. RDTSC on x86)
  fenced on both sides.

Everything here is process-internal plumbing; the public benchmark API
lives in the operator modules.
"""

from __future__ import annotations

import functools

from llvmlite import ir
from numba import types
from numba.extending import intrinsic

_I32 = ir.IntType(32)
_I64 = ir.IntType(64)
_VEC8 = ir.VectorType(_I64, 8)
_VEC64B = ir.VectorType(ir.IntType(8), 64)


def _elem_ptr(context, builder, arr_type, arr_val, idx_val):
    ary = context.make_array(arr_type)(context, builder, arr_val)
    return builder.gep(ary.data, [idx_val])


@intrinsic
def atomic_xchg_u8(typingctx, arr, idx, val):
    """old = arr[idx]; arr[idx] = val, atomically with acquire ordering."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.uint8):
        return None
    sig = types.uint8(arr, types.intp, types.uint8)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("xchg", ptr, args[2], "acquire")

    return sig, codegen


@intrinsic
def atomic_release_u8(typingctx, arr, idx, val):
    """arr[idx] = val with release ordering (latch unlock)."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.uint8):
        return None
    sig = types.void(arr, types.intp, types.uint8)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        builder.store_atomic(args[2], ptr, "release", 1)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def load_u64_scalar(typingctx, arr, idx):
    """Monotonic-atomic 64-bit load: exactly one movq, never vectorized."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.uint64):
        return None
    sig = types.uint64(arr, types.intp)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, "monotonic", 8)

    return sig, codegen


@intrinsic
def store_u64_scalar(typingctx, arr, idx, val):
    """Monotonic-atomic 64-bit store: exactly one movq, never vectorized."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.uint64):
        return None
    sig = types.void(arr, types.intp, types.uint64)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        builder.store_atomic(args[2], ptr, "monotonic", 8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def load512_accum(typingctx, arr, idx, acc):
    """acc[0:8] += arr[idx:idx+8] as one <8 x i64> load-add-store."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.uint64):
        return None
    sig = types.void(arr, types.intp, acc)

    def codegen(context, builder, signature, args):
        src = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        vsrc = builder.bitcast(src, _VEC8.as_pointer())
        v = builder.load(vsrc, align=8)
        accp = context.make_array(signature.args[2])(context, builder, args[2])
        vacc = builder.bitcast(accp.data, _VEC8.as_pointer())
        builder.store(builder.add(builder.load(vacc, align=8), v), vacc, align=8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def store512(typingctx, arr, idx, pattern):
    """arr[idx:idx+8] = pattern[0:8] as one <8 x i64> store."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.uint64):
        return None
    sig = types.void(arr, types.intp, pattern)

    def codegen(context, builder, signature, args):
        patp = context.make_array(signature.args[2])(context, builder, args[2])
        vpat = builder.bitcast(patp.data, _VEC8.as_pointer())
        v = builder.load(vpat, align=8)
        dst = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        vdst = builder.bitcast(dst, _VEC8.as_pointer())
        builder.store(v, vdst, align=8)
        return context.get_dummy_value()

    return sig, codegen


def _splat64(builder, scalar):
    undef = ir.Constant(_VEC64B, ir.Undefined)
    seed = builder.insert_element(undef, scalar, ir.Constant(_I32, 0))
    zeros = ir.Constant(ir.VectorType(_I32, 64), None)
    return builder.shuffle_vector(seed, undef, zeros)


@intrinsic
def cmp_range_64(typingctx, arr, idx, lo, hi):
    """Bit j of the result = (lo <= arr[idx+j] <= hi), j in 0..63,
    computed as one unaligned <64 x i8> load and compare pair."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.uint8):
        return None
    sig = types.uint64(arr, types.intp, types.uint8, types.uint8)

    def codegen(context, builder, signature, args):
        ptr = _elem_ptr(context, builder, signature.args[0], args[0], args[1])
        vec = builder.load(builder.bitcast(ptr, _VEC64B.as_pointer()), align=1)
        ge = builder.icmp_unsigned(">=", vec, _splat64(builder, args[2]))
        le = builder.icmp_unsigned("<=", vec, _splat64(builder, args[3]))
        return builder.bitcast(builder.and_(ge, le), _I64)

    return sig, codegen


@intrinsic
def readcycles(typingctx):
    """Fenced read of the CPU cycle counter (RDTSC on x86)."""
    sig = types.uint64()

    def codegen(context, builder, signature, args):
        mod = builder.module
        name = "llvm.readcyclecounter"
        fn = mod.globals.get(name)
        if fn is None:
            fn = ir.Function(mod, ir.FunctionType(_I64, []), name)
        builder.fence("seq_cst")
        ticks = builder.call(fn, [])
        builder.fence("seq_cst")
        return ticks

    return sig, codegen


@functools.lru_cache(maxsize=None)
def cpu_flags() -> frozenset[str]:
    """ISA feature flags of the host CPU (empty when undetectable)."""
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("flags"):
                    return frozenset(line.split(":", 1)[1].split())
    except OSError:
        pass
    return frozenset()


def has_avx512() -> bool:
    """True when the host executes 512-bit vector instructions."""
    return "avx512f" in cpu_flags()
