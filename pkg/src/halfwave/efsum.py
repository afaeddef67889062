"""Error-free transformations of floating-point addition.

A rounded sum s = fl(a + b) loses information; these transformations also
return the lost part t such that s + t == a + b exactly in real arithmetic.

Two variants are provided.  The three-operation form assumes the first
operand dominates (exact whenever exponent(a) >= exponent(b)); the
six-operation form is exact unconditionally.  Both are straight-line code,
no branches, so they vectorize cleanly.  Accumulating a sequence through
compensated_accumulate keeps the running compensation t and folds it into
the next increment before it can be absorbed, which is what defeats the
stagnation of naive recursive summation once the running sum dwarfs the
increments.

Overflow of s is not handled here: t is then meaningless and the caller is
expected to flag the whole computation (the solvers check every field for
non-finite values each step).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .precision import Lane, PScalar, Precision, p_add, p_sub, round_to


class Variant(enum.Enum):
    """Which error-free transformation an accumulation uses."""

    OP3 = "op3"
    OP6 = "op6"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SumResult:
    """Rounded sum s plus the compensation term t (the lost bits)."""

    s: PScalar
    t: PScalar

    @classmethod
    def zero(cls, precision: Precision) -> "SumResult":
        z = round_to(precision, 0.0)
        return cls(z, z)


def sum_3op(precision: Precision, a, b) -> SumResult:
    """Three-operation transformation; exact when exponent(a) >= exponent(b)."""
    s = p_add(precision, a, b)
    z = p_sub(precision, s, a)
    t = p_sub(precision, b, z)
    return SumResult(s, t)


def sum_6op(precision: Precision, a, b) -> SumResult:
    """Six-operation transformation; exact for any finite operands."""
    s = p_add(precision, a, b)
    p_a = p_sub(precision, s, b)
    p_b = p_sub(precision, s, p_a)
    d_a = p_sub(precision, a, p_a)
    d_b = p_sub(precision, b, p_b)
    t = p_add(precision, d_a, d_b)
    return SumResult(s, t)


def compensated_accumulate(
    precision: Precision, running: SumResult, increment, variant: Variant
) -> SumResult:
    """Add one increment into (s, t): fold t into the increment, then EFT."""
    r = p_add(precision, running.t, increment)
    eft = sum_3op if variant is Variant.OP3 else sum_6op
    return eft(precision, running.s, r)


def naive_sum(precision: Precision, values) -> PScalar:
    """Plain recursive summation, every partial sum rounded."""
    s = round_to(precision, 0.0)
    for v in values:
        s = p_add(precision, s, v)
    return s


def compensated_sum(precision: Precision, values, variant: Variant) -> SumResult:
    """Recursive summation through compensated_accumulate."""
    state = SumResult.zero(precision)
    for v in values:
        state = compensated_accumulate(precision, state, v, variant)
    return state


# --- vectorized forms, used inside the solver kernels -----------------------


def vec_sum_3op(ln: Lane, a: np.ndarray, b: np.ndarray):
    s = ln.add(a, b)
    z = ln.sub(s, a)
    t = ln.sub(b, z)
    return s, t


def vec_sum_6op(ln: Lane, a: np.ndarray, b: np.ndarray):
    s = ln.add(a, b)
    p_a = ln.sub(s, b)
    p_b = ln.sub(s, p_a)
    d_a = ln.sub(a, p_a)
    d_b = ln.sub(b, p_b)
    t = ln.add(d_a, d_b)
    return s, t


def vec_accumulate(ln: Lane, s: np.ndarray, t: np.ndarray, x: np.ndarray, variant: Variant):
    """Vector form of compensated_accumulate on work-dtype arrays."""
    r = ln.add(t, x)
    eft = vec_sum_3op if variant is Variant.OP3 else vec_sum_6op
    return eft(ln, s, r)
