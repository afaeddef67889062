"""Fourth-order staggered finite differences in a selectable precision.

The derivative at a point offset half a cell from the input samples is

    f'(x) ~ [ f(x+dx/2) - f(x-dx/2) ] * 9/(8 dx)
          - [ f(x+3dx/2) - f(x-3dx/2) ] / (24 dx)

expressed below as four taps [1/24, -9/8, 9/8, -1/24] at sample offsets
[-3/2, -1/2, +1/2, +3/2] cells.  Taps are divided by dx as exact rationals
and rounded once into the stencil precision at setup; at evaluation time
every multiply and every add is correctly rounded in that precision, in a
fixed accumulation order (inner tap pair, outer tap pair, then their sum)
so results are reproducible bit for bit regardless of how the work is
scheduled, and so the antisymmetric pairs cancel constants exactly.

x is periodic: the stencil wraps around the domain.  Free surfaces (y only)
are handled with image ghosts, chosen per field so the surface conditions
hold: fields that are even across the surface are mirrored, odd fields are
mirrored with a sign flip (and odd integer-row fields keep a pinned zero on
the surface row itself).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .grids import Field2D, GridSpec, Stagger
from .precision import Lane, Precision, lane, round_fraction

TAPS = (Fraction(1, 24), Fraction(-9, 8), Fraction(9, 8), Fraction(-1, 24))

# sample index shifts for the two half-cell pairings: an output on the
# half-offset side reads [-1, 0, 1, 2]; an output on the integer side reads
# [-2, -1, 0, 1] (both are the tap offsets minus the staggering shift)
_SHIFTS_TO_HALF = (-1, 0, 1, 2)
_SHIFTS_TO_INT = (-2, -1, 0, 1)


@dataclass(frozen=True)
class StencilSpec:
    """The four dx-scaled taps, pre-rounded into one precision."""

    precision: Precision
    dx: float
    coefficients: tuple[float, float, float, float]

    @classmethod
    def make(cls, precision: Precision, dx: float) -> "StencilSpec":
        if not dx > 0.0:
            raise ValueError("dx must be positive")
        coeffs = tuple(round_fraction(precision, t / Fraction(dx)) for t in TAPS)
        return cls(precision, dx, coeffs)

    def __post_init__(self):
        c1, c2, c3, c4 = self.coefficients
        # rounding is sign-symmetric, so the taps stay exactly antisymmetric
        if not (c1 == -c4 and c2 == -c3):
            raise ValueError("stencil coefficients must be antisymmetric")


class Parity(enum.Enum):
    """How a field continues across a free surface."""

    EVEN = 1
    ODD = -1


def _accumulate(ln: Lane, coeffs, terms) -> np.ndarray:
    # fixed order: the dominant -+9/8 pair first, then the outer 1/24 pair,
    # then their sum; each pair is exactly antisymmetric, so a constant
    # input cancels to exactly zero in any precision
    c1, c2, c3, c4 = (ln.constant(c) for c in coeffs)
    inner = ln.add(ln.mul(c2, terms[1]), ln.mul(c3, terms[2]))
    outer = ln.add(ln.mul(c1, terms[0]), ln.mul(c4, terms[3]))
    return ln.add(inner, outer)


# Ghost-padded tap buffers, pooled by shape and dtype.  Every call fills its
# buffer completely before reading it, and the tap views feeding _accumulate
# die within the call, so single-threaded reuse is safe and saves the four
# rolled copies per derivative that this used to cost.
_PAD_POOL: dict[tuple, np.ndarray] = {}


def _pad_buffer(shape: tuple, dtype: np.dtype) -> np.ndarray:
    key = (shape, np.dtype(dtype).str)
    buf = _PAD_POOL.get(key)
    if buf is None:
        buf = np.empty(shape, dtype=dtype)
        _PAD_POOL[key] = buf
    return buf


def ddx_work(ln: Lane, a: np.ndarray, in_half_x: bool, coeffs) -> np.ndarray:
    """Periodic x derivative on a working-dtype array."""
    ny, nx = a.shape
    pad = _pad_buffer((ny, nx + 4), a.dtype)
    pad[:, 2:-2] = a
    pad[:, :2] = a[:, -2:]
    pad[:, -2:] = a[:, :2]
    shifts = _SHIFTS_TO_INT if in_half_x else _SHIFTS_TO_HALF
    terms = [pad[:, 2 + s : 2 + s + nx] for s in shifts]
    return _accumulate(ln, coeffs, terms)


def ddy_work_periodic(ln: Lane, a: np.ndarray, in_half_y: bool, coeffs) -> np.ndarray:
    ny, nx = a.shape
    pad = _pad_buffer((ny + 4, nx), a.dtype)
    pad[2:-2] = a
    pad[:2] = a[-2:]
    pad[-2:] = a[:2]
    shifts = _SHIFTS_TO_INT if in_half_y else _SHIFTS_TO_HALF
    terms = [pad[2 + s : 2 + s + ny] for s in shifts]
    return _accumulate(ln, coeffs, terms)


def pad_free_y(a: np.ndarray, in_half_y: bool, parity: Parity) -> np.ndarray:
    """Add two image ghost rows on each side of the y axis.

    Half-offset rows mirror about the surface plane between row -1 and row 0:
    ghost[-k] = sign * a[k-1].  Integer rows mirror about row 0 itself:
    ghost[-k] = sign * a[k].  Same construction at the bottom surface.

    The returned array is a pooled buffer, valid until the next same-shape
    derivative call.
    """
    sign = parity.value
    pad = _pad_buffer((a.shape[0] + 4, a.shape[1]), a.dtype)
    pad[2:-2] = a
    if in_half_y:
        pad[1] = sign * a[0]
        pad[0] = sign * a[1]
        pad[-2] = sign * a[-1]
        pad[-1] = sign * a[-2]
    else:
        pad[1] = sign * a[1]
        pad[0] = sign * a[2]
        pad[-2] = sign * a[-2]
        pad[-1] = sign * a[-3]
    return pad


def ddy_work_free(
    ln: Lane, a: np.ndarray, in_half_y: bool, parity: Parity, coeffs
) -> np.ndarray:
    """Free-surface y derivative; output lands on the other y sub-grid.

    Ghost values are exact copies or negations of interior values, so the
    padding itself introduces no rounding in any precision.
    """
    shifts = _SHIFTS_TO_INT if in_half_y else _SHIFTS_TO_HALF
    rows_out = a.shape[0] + 1 if in_half_y else a.shape[0] - 1
    pad = pad_free_y(a, in_half_y, parity)
    terms = [pad[2 + s : 2 + s + rows_out] for s in shifts]
    return _accumulate(ln, coeffs, terms)


def _check_pairing(axis: str, in_stagger: Stagger, out_stagger: Stagger) -> None:
    dx_differs = in_stagger.half_x != out_stagger.half_x
    dy_differs = in_stagger.half_y != out_stagger.half_y
    ok = (dx_differs and not dy_differs) if axis == "x" else (dy_differs and not dx_differs)
    if not ok:
        raise ValueError(
            f"dd{axis} needs staggers differing by half a cell along {axis} only, "
            f"got {in_stagger.name} -> {out_stagger.name}"
        )


def ddx(field: Field2D, target: Stagger, stencil: StencilSpec, grid: GridSpec) -> Field2D:
    """x derivative of a staggered field, returned on the target sub-grid."""
    _check_pairing("x", field.stagger, target)
    ln = lane(stencil.precision)
    out = ddx_work(ln, ln.load(field.values), field.stagger.half_x, stencil.coefficients)
    return Field2D(ln.store(out), target)


def ddy(
    field: Field2D,
    target: Stagger,
    stencil: StencilSpec,
    grid: GridSpec,
    parity: Parity | None = None,
) -> Field2D:
    """y derivative; free-surface grids need the field's surface parity."""
    _check_pairing("y", field.stagger, target)
    ln = lane(stencil.precision)
    a = ln.load(field.values)
    if grid.free_surface_y:
        if parity is None:
            raise ValueError("free-surface ddy requires the field parity")
        out = ddy_work_free(ln, a, field.stagger.half_y, parity, stencil.coefficients)
    else:
        out = ddy_work_periodic(ln, a, field.stagger.half_y, stencil.coefficients)
    return Field2D(ln.store(out), target)


def apply_free_surface(syy: Field2D, grid: GridSpec) -> None:
    """Pin the normal stress to zero on both surface rows."""
    if not grid.free_surface_y:
        raise ValueError("apply_free_surface needs a free-surface y boundary")
    if syy.stagger is not Stagger.CELL:
        raise ValueError("normal stress must live on the cell sub-grid")
    syy.values[0, :] = 0
    syy.values[-1, :] = 0
