"""Compiled inner loop for binary16 lattice rounding.

quantize16 in precision.py spends nine full-array numpy passes per call,
and the half-precision lanes call it once per arithmetic operation, which
makes it the dominant cost of an entire simulation.  This module fuses the
same magic-number rounding into a single compiled pass.  It is an optional
accelerator: precision.py falls back to the numpy path when the import
fails, and the test suite asserts the two paths agree bit for bit.

The magic table is indexed by the binary32 exponent byte.  Entry e holds
2^(clip(e, 113, 143) - 114): adding and subtracting that power of two makes
the float32 hardware round (ties to even) at exactly the binary16 quantum
of the value's binade.  113 and 143 are the exponent fields of 2^-14 and
2^16, the edges of the binary16 normal range; clipping to them gives
gradual underflow below and a finite-overflow check above.

Single-threaded on purpose: results must not depend on thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MAGIC = np.array(
    [2.0 ** (min(max(e, 113), 143) - 114) for e in range(256)], dtype=np.float32
)
_MAX16 = np.float32(65504.0)
_INF32 = np.float32(np.inf)


@njit("void(float32[::1], uint32[::1])", cache=True)
def round16_flat(f, bits):
    """Round a flat float32 array onto the binary16 lattice, in place.

    bits must be the same buffer viewed as uint32.  Matches quantize16:
    ties to even, gradual underflow, overflow to signed infinity, NaN and
    signed zeros kept.
    """
    for k in range(f.size):
        x = f[k]
        m = _MAGIC[(bits[k] >> np.uint32(23)) & np.uint32(0xFF)]
        y = np.float32(abs(x)) + m
        y = y - m
        y = _INF32 if y > _MAX16 else y
        f[k] = np.copysign(y, x)
