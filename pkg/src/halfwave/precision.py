"""Configurable floating-point precision model.

Three IEEE 754 binary formats are supported: binary64 (native Python/numpy
float), binary32, and binary16.  binary16 has no native CPU arithmetic here,
so every binary16 operation is emulated by computing in a wider format and
rounding the wide result once to binary16.

Why that is exact: for +, -, *, / on precision-p operands, computing the
operation correctly rounded in a format with q significand bits and then
rounding that result to p bits gives the same answer as a single rounding of
the exact result whenever q >= 2p + 2 (the double-rounding-safe regime).
binary16 has p = 11, so any q >= 24 works: binary32 (q = 24) and binary64
(q = 53) are both safe, and the same bound covers binary32 emulated through
binary64 (53 >= 2*24 + 2).  Scalar emulation here computes in binary64 and
rounds once; the vectorized kernels compute in binary32 and round after every
operation.  Both paths are bitwise identical and are tested against an
exact-rational oracle.  Note the theorem is about single operation results:
re-rounding an arbitrary binary64 value through binary32 is not safe, so
cross-format demotion of raw data is always a single direct cast.

Rounding is always round-to-nearest, ties-to-even.  Subnormals are kept
(gradual underflow), overflow produces a signed infinity, and NaN propagates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class Precision(enum.Enum):
    FP16 = "fp16"
    FP32 = "fp32"
    FP64 = "fp64"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class FloatFormat:
    """Static description of one IEEE 754 binary format."""

    name: str
    exponent_bits: int
    fraction_bits: int  # stored bits; the significand has one more implicit bit
    unit_roundoff: float
    max_finite: float
    min_positive_normal: float
    min_positive_subnormal: float

    @property
    def significand_bits(self) -> int:
        return self.fraction_bits + 1

    @property
    def emax(self) -> int:
        return 2 ** (self.exponent_bits - 1) - 1

    @property
    def emin(self) -> int:
        return 1 - self.emax


def _make_format(name: str, exponent_bits: int, fraction_bits: int) -> FloatFormat:
    emax = 2 ** (exponent_bits - 1) - 1
    emin = 1 - emax
    return FloatFormat(
        name=name,
        exponent_bits=exponent_bits,
        fraction_bits=fraction_bits,
        unit_roundoff=math.ldexp(1.0, -(fraction_bits + 1)),
        max_finite=math.ldexp(2.0 - math.ldexp(1.0, -fraction_bits), emax),
        min_positive_normal=math.ldexp(1.0, emin),
        min_positive_subnormal=math.ldexp(1.0, emin - fraction_bits),
    )


FORMATS: dict[Precision, FloatFormat] = {
    Precision.FP16: _make_format("fp16", 5, 10),
    Precision.FP32: _make_format("fp32", 8, 23),
    Precision.FP64: _make_format("fp64", 11, 52),
}

DTYPES: dict[Precision, np.dtype] = {
    Precision.FP16: np.dtype(np.float16),
    Precision.FP32: np.dtype(np.float32),
    Precision.FP64: np.dtype(np.float64),
}


@dataclass(frozen=True)
class PScalar:
    """A scalar tagged with the precision it was rounded to.

    The value lives in a binary64 container; the tag asserts that it is
    exactly representable in (already rounded to) the tagged format.
    """

    value: float
    precision: Precision


def round_to(precision: Precision, x: float) -> PScalar:
    """Round a binary64 value once to the target format, ties to even.

    Overflow gives a signed infinity, underflow is gradual, NaN and signed
    zeros pass through.  Idempotent on values already in the format.
    """
    if precision is Precision.FP64:
        return PScalar(float(x), precision)
    with np.errstate(over="ignore"):
        v = float(DTYPES[precision].type(x))
    return PScalar(v, precision)


def _coerce(precision: Precision, x) -> float:
    if isinstance(x, PScalar):
        if x.precision is not precision:
            raise ValueError(f"operand tagged {x.precision}, expected {precision}")
        return x.value
    v = float(x)
    r = round_to(precision, v).value
    if not (r == v or (math.isnan(r) and math.isnan(v))):
        raise ValueError(f"{v!r} is not representable in {precision}")
    return v


def p_add(precision: Precision, a, b) -> PScalar:
    """Correctly rounded addition in the tagged format."""
    return round_to(precision, _coerce(precision, a) + _coerce(precision, b))


def p_sub(precision: Precision, a, b) -> PScalar:
    """Correctly rounded subtraction in the tagged format."""
    return round_to(precision, _coerce(precision, a) - _coerce(precision, b))


def p_mul(precision: Precision, a, b) -> PScalar:
    """Correctly rounded multiplication in the tagged format."""
    with np.errstate(over="ignore"):
        return round_to(precision, _coerce(precision, a) * _coerce(precision, b))


def p_div(precision: Precision, a, b) -> PScalar:
    """Correctly rounded division in the tagged format.

    The binary64 quotient is rounded once more to the target; this double
    rounding is exact in the q >= 2p + 2 regime (see module docstring).
    """
    av, bv = _coerce(precision, a), _coerce(precision, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.float64(av) / np.float64(bv)
    return round_to(precision, float(q))


def round_fraction(precision: Precision, value: Fraction) -> float:
    """Round an exact rational once to the target format, ties to even.

    Used wherever a constant must enter a format without an intermediate
    binary64 rounding (stencil taps scaled by 1/dx, for example).
    """
    fmt = FORMATS[precision]
    num, den = value.numerator, value.denominator
    if num == 0:
        return 0.0
    sign = num < 0
    a = abs(num)
    # e = floor(log2(a/den))
    e = a.bit_length() - den.bit_length()
    if (a << max(0, -e)) < (den << max(0, e)):
        e -= 1
    p = fmt.significand_bits
    qexp = max(e, fmt.emin) - (p - 1)  # quantum exponent, clamped for subnormals
    if qexp >= 0:
        n_, d_ = a, den << qexp
    else:
        n_, d_ = a << -qexp, den
    m, r = divmod(n_, d_)
    if 2 * r > d_ or (2 * r == d_ and m & 1):
        m += 1
    if m == 0:
        mag = 0.0
    elif m.bit_length() - 1 + qexp > fmt.emax:
        mag = math.inf
    else:
        mag = math.ldexp(float(m), qexp)
    return -mag if sign else mag


# ---------------------------------------------------------------------------
# Vectorized kernel support.
#
# Solver kernels work on whole arrays.  For FP32/FP64 the numpy ufuncs already
# round every operation correctly in the storage dtype.  For FP16 the kernels
# compute in binary32 (exact widening of binary16 operands) and round after
# every operation with quantize16 below, which is branchless and considerably
# faster than numpy's float16 ufuncs while producing bitwise-identical
# results (see the double-rounding argument in the module docstring).
# ---------------------------------------------------------------------------

# compiled single-pass variant of quantize16; bit-for-bit agreement with the
# numpy path below is asserted in the test suite
try:
    from ._fast16 import round16_flat as _round16_flat
except Exception:  # numba missing or unable to compile on this platform
    _round16_flat = None

_EXP_MASK = np.uint32(0x7F800000)
_EXP_LO = np.uint32(0x38800000)  # binary32 exponent of 2^-14
_EXP_HI = np.uint32(0x47800000)  # binary32 exponent of 2^16
_MAGIC_SHIFT = np.uint32(0x06800000)  # adds 13 to the exponent field
_F16_MAX = np.float32(65504.0)
_INF32 = np.float32(np.inf)

# Rounding scratch, keyed by array shape.  Solver kernels call quantize16
# thousands of times per step on a handful of fixed shapes, so reusing the
# exponent/result/overflow buffers removes most allocation cost.  Everything
# here runs on one thread; the buffers are dead between calls.
_SCRATCH: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _scratch(shape: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    got = _SCRATCH.get(shape)
    if got is None:
        got = (
            np.empty(shape, dtype=np.uint32),
            np.empty(shape, dtype=np.float32),
            np.empty(shape, dtype=bool),
        )
        _SCRATCH[shape] = got
    return got


def quantize16(x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Round binary32 values to the nearest binary16 values, kept in binary32.

    Ties to even, gradual underflow, overflow to signed infinity, NaN kept.
    The quantum for |x| in a binade 2^e..2^(e+1) is 2^(e-10) (clamped to
    2^-24 below the normal range); adding and subtracting 2^(e+13) makes the
    binary32 hardware perform exactly that rounding.  Bitwise identical to
    x.astype(float16).astype(float32), which is asserted in the test suite.

    The input must already be exact in binary32 (fields widened from binary16,
    or single binary32 operation results).  Arbitrary binary64 values would be
    rounded twice; route those through demote() instead.

    out, if given, receives the result; out is x is allowed and rounds the
    array in place.
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    if out is None:
        out = np.empty_like(x)
    exp, y, over = _scratch(x.shape)
    np.bitwise_and(x.view(np.uint32), _EXP_MASK, out=exp)
    np.clip(exp, _EXP_LO, _EXP_HI, out=exp)
    exp += _MAGIC_SHIFT
    magic = exp.view(np.float32)
    np.abs(x, out=y)
    y += magic
    y -= magic
    np.greater(y, _F16_MAX, out=over)
    np.copyto(y, _INF32, where=over)
    np.copysign(y, x, out=out)
    return out


def demote(precision: Precision, a: np.ndarray) -> np.ndarray:
    """Round an array into the format's storage dtype in a single step.

    This is the correct way to push binary64 data (for example a stencil
    evaluated in binary64) down into a narrower update format: one cast,
    one rounding.
    """
    a = np.asarray(a)
    dtype = DTYPES[precision]
    if a.dtype == dtype:
        return a
    with np.errstate(over="ignore"):
        return a.astype(dtype)


class Lane:
    """Array arithmetic with every operation correctly rounded in one format.

    Fields at rest stay in the storage dtype (16-bit containers for FP16);
    load/store conversions are exact and never round.
    """

    def __init__(self, precision: Precision):
        self.precision = precision
        self.fmt = FORMATS[precision]
        self.storage_dtype = DTYPES[precision]
        self.work_dtype = np.dtype(np.float32) if precision is Precision.FP16 else self.storage_dtype
        self._rounds = precision is Precision.FP16

    def constant(self, x: float) -> float:
        """Round a binary64 scalar once into the lane."""
        return round_to(self.precision, x).value

    def load(self, a: np.ndarray) -> np.ndarray:
        """Storage to working container, exact.  The result may alias a."""
        return np.asarray(a, dtype=self.work_dtype)

    def store(self, a: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Working to storage container, exact for in-lane values."""
        if out is None:
            return np.asarray(a, dtype=self.storage_dtype)
        out[...] = a
        return out

    def _round(self, r: np.ndarray) -> np.ndarray:
        # r is a fresh operation result, so rounding it in place is safe
        if not self._rounds:
            return r
        if _round16_flat is not None and r.flags.c_contiguous:
            _round16_flat(r.ravel(), r.view(np.uint32).ravel())
            return r
        return quantize16(r, out=r)

    # overflow to inf and NaN propagation are in-model outcomes; the solvers
    # suppress the numpy warnings once per run and check every field for
    # non-finite values every step

    def add(self, a, b) -> np.ndarray:
        return self._round(np.add(a, b, dtype=self.work_dtype))

    def sub(self, a, b) -> np.ndarray:
        return self._round(np.subtract(a, b, dtype=self.work_dtype))

    def mul(self, a, b) -> np.ndarray:
        return self._round(np.multiply(a, b, dtype=self.work_dtype))

    def div(self, a, b) -> np.ndarray:
        return self._round(np.divide(a, b, dtype=self.work_dtype))


def lane(precision: Precision) -> Lane:
    return Lane(precision)
