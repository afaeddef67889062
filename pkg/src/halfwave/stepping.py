"""Precision plumbing shared by the acoustic and elastic time loops.

A solver evaluates spatial derivatives in the stencil precision, then
performs the solution update in the update precision.  The two formats are
independent: rounding the assembled right-hand side into the update format
is always a single rounding (demote), and widenings are exact.

Every update-precision increment is the fully scaled quantity
dt * rhs / medium (with dt pre-rounded into the update format), so in
compensated mode the carried residuals are comparable in size to what they
are added to.  Folding the residual into the raw, unscaled stencil output
instead would shrink it below one rounding unit of that output and lose it.
"""

from __future__ import annotations

import numpy as np

from .diagnostics import RangeFailureError
from .efsum import Variant, vec_accumulate
from .precision import Lane, PScalar, Precision, demote, lane, p_add, round_to


class UpdatePipeline:
    """Converts, scales, and accumulates per-field solution updates."""

    def __init__(self, stencil_precision: Precision, update_precision: Precision, dt: float):
        self.ln_s: Lane = lane(stencil_precision)
        self.ln_u: Lane = lane(update_precision)
        self.dt_u: float = self.ln_u.constant(dt)

    @staticmethod
    def _convert(a: np.ndarray, ln_from: Lane, ln_to: Lane) -> np.ndarray:
        if ln_from.precision is ln_to.precision:
            return a
        # one rounding when narrowing, exact when widening
        return ln_to.load(demote(ln_to.precision, a))

    def to_stencil(self, a: np.ndarray) -> np.ndarray:
        """Update-lane work array into the stencil lane."""
        return self._convert(a, self.ln_u, self.ln_s)

    def to_update(self, a: np.ndarray) -> np.ndarray:
        """Stencil-lane work array into the update lane."""
        return self._convert(a, self.ln_s, self.ln_u)

    def _plane(self, plane: np.ndarray, ln: Lane) -> np.ndarray:
        return ln.load(demote(ln.precision, np.ascontiguousarray(plane)))

    def update_plane(self, plane: np.ndarray) -> np.ndarray:
        """Materialize a binary64 medium plane once in the update format."""
        return self._plane(plane, self.ln_u)

    def stencil_plane(self, plane: np.ndarray) -> np.ndarray:
        """Materialize a binary64 medium plane once in the stencil format."""
        return self._plane(plane, self.ln_s)

    def increment(
        self,
        rhs: np.ndarray,
        divisor: np.ndarray | None = None,
        source: tuple[int, int, float] | None = None,
    ) -> np.ndarray:
        """Build the update-precision increment dt * (rhs + source) / divisor.

        rhs is a stencil-lane work array and is consumed: when the two lanes
        share a precision the source injection writes into it in place.  The
        point source (iy, ix, value) is added before the division, in the
        update precision.
        """
        x = self.to_update(rhs)
        if source is not None:
            iy, ix, value = source
            if value != 0.0:
                sv = round_to(self.ln_u.precision, value)
                cell = PScalar(float(x[iy, ix]), self.ln_u.precision)
                x[iy, ix] = p_add(self.ln_u.precision, cell, sv).value
        if divisor is not None:
            x = self.ln_u.div(x, divisor)
        return self.ln_u.mul(x, self.dt_u)

    def advance(
        self,
        field: np.ndarray,
        residual: np.ndarray,
        x: np.ndarray,
        variant: Variant | None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Accumulate the increment x onto the field.

        Baseline (variant None): plain correctly rounded add; the residual
        array passes through untouched as scratch.  Compensated: the carried
        residual joins the increment and an error-free transformation splits
        the result back into (field, residual).
        """
        if variant is None:
            return self.ln_u.add(field, x), residual
        return vec_accumulate(self.ln_u, field, residual, x, variant)


def check_finite(step: int, fields: dict[str, np.ndarray]) -> None:
    """Raise RangeFailureError naming the first non-finite field."""
    for name, values in fields.items():
        if not np.isfinite(values).all():
            raise RangeFailureError(step, name)
