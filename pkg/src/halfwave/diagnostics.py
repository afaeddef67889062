"""Binary64 run diagnostics: discrete energy, traces, and comparisons.

Diagnostics read simulation state through exact widening to binary64 and
never write back, so they cannot perturb a run.  Sums are taken over
C-contiguous binary64 arrays in a fixed term order, which makes every
diagnostic value bit-reproducible across runs and thread counts.

The discrete energy pairs pressure-like fields across consecutive time
levels (P at steps n and n+1, velocities at n+1/2).  The same-level
quadratic form is not conserved by the staggered leapfrog; the
cross-level form is, which is what makes binary64 energy flatness usable
as a correctness oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec, Medium, Stagger, extend_rows


class RangeFailureError(RuntimeError):
    """A simulation field left the representable range (inf or NaN)."""

    def __init__(self, step: int, field_name: str):
        super().__init__(
            f"non-finite value in field {field_name!r} after step {step}"
        )
        self.step = step
        self.field_name = field_name


@dataclass
class TraceSeries:
    """Per-step receiver samples of one field, in binary64."""

    field: str
    ix: int
    iy: int
    samples: np.ndarray


@dataclass
class EnergySeries:
    """Discrete energy sampled every K steps, in binary64."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def flags(self) -> np.ndarray:
        """Per-sample indicator: True where the energy value is non-finite."""
        return ~np.isfinite(self.values)


@dataclass
class RunOutput:
    traces: list[TraceSeries]
    energy: EnergySeries
    flags: dict = field(default_factory=dict)


def _wide(a: np.ndarray) -> np.ndarray:
    """Exact row-major binary64 view of a field buffer."""
    return np.ascontiguousarray(a, dtype=np.float64)


def acoustic_energy(p_prev, p_new, vx, vy, medium: Medium, dx: float) -> float:
    """E = (dx^2/2) [sum beta P^n P^{n+1} + sum rho_x Vx^2 + sum rho_y Vy^2].

    The pressure pair spans consecutive integer time levels; the velocities
    sit at the half level between them.  Each of the three sums is taken
    separately in row-major order, then combined left to right.
    """
    p_prev, p_new, vx, vy = map(_wide, (p_prev, p_new, vx, vy))
    compress = float(np.sum(medium.planes["beta"] * (p_prev * p_new)))
    kin_x = float(np.sum(medium.planes["rho_x"] * np.square(vx)))
    kin_y = float(np.sum(medium.planes["rho_y"] * np.square(vy)))
    return 0.5 * dx * dx * (compress + kin_x + kin_y)


def _row_weights(rows: int, free_surface: bool) -> np.ndarray:
    # integer-y sub-grids put their end rows exactly on the free surfaces,
    # where the trapezoidal measure carries half a cell
    w = np.ones((rows, 1))
    if free_surface:
        w[0] = 0.5
        w[-1] = 0.5
    return w


def elastic_energy(
    stress_prev: tuple,
    stress_new: tuple,
    vx,
    vy,
    medium: Medium,
    grid: GridSpec,
) -> float:
    """Kinetic plus compliance strain energy with cross-level stress pairing.

    stress_prev and stress_new are (sxx, syy, sxy) at steps n and n+1; the
    velocities sit at n+1/2.  The strain term inverts the isotropic
    stiffness: [ (lam+2mu)(sxx sxx' + syy syy') - lam(sxx syy' + syy sxx') ]
    / (4 mu (lam+mu)) + sxy sxy' / mu.  Where mu == 0 the stress is
    isotropic and the compliance degenerates; those cells contribute the
    acoustic limit sxx sxx' / (lam+mu) and no shear term.

    With free surfaces, the surface rows carry half weight, sigma_yy is
    pinned to zero there, and sigma_xx contributes through the plane-stress
    modulus 4 mu (lam+mu) / (lam+2mu) that also drives its surface update.
    """
    sxx_n, syy_n, sxy_n = map(_wide, stress_prev)
    sxx_1, syy_1, sxy_1 = map(_wide, stress_new)
    vx, vy = map(_wide, (vx, vy))
    fs = grid.free_surface_y

    lam = extend_rows(medium.planes["lam"], grid, Stagger.CELL)
    mu_c = extend_rows(medium.planes["mu"], grid, Stagger.CELL)
    rho_x = extend_rows(medium.planes["rho_x"], grid, Stagger.XFACE)
    rho_y = medium.planes["rho_y"]
    mu_n = medium.planes["mu"]  # node rows reuse the cell-row values

    w = _row_weights(grid.rows(Stagger.XFACE), fs)
    kin_x = float(np.sum(w * rho_x * np.square(vx)))
    kin_y = float(np.sum(rho_y * np.square(vy)))

    stiff = lam + 2.0 * mu_c
    dd = 4.0 * mu_c * (lam + mu_c)
    pressure_like = mu_c == 0.0
    num = stiff * (sxx_n * sxx_1 + syy_n * syy_1) - lam * (
        sxx_n * syy_1 + syy_n * sxx_1
    )
    strain = np.divide(num, dd, out=np.zeros_like(num), where=~pressure_like)
    np.divide(
        sxx_n * sxx_1, lam + mu_c, out=strain, where=pressure_like
    )
    if fs:
        # plane-stress surface rows: syy is pinned to zero, so only the
        # sxx pairing survives, against the modulus of its modified update
        for j in (0, -1):
            with np.errstate(divide="ignore", invalid="ignore"):
                surf = sxx_n[j] * sxx_1[j] * stiff[j] / dd[j]
            strain[j] = np.where(pressure_like[j], 0.0, surf)
    wc = _row_weights(grid.rows(Stagger.CELL), fs)
    strain_sum = float(np.sum(wc * strain))

    shear = np.divide(
        sxy_n * sxy_1, mu_n, out=np.zeros_like(mu_n), where=mu_n > 0.0
    )
    shear_sum = float(np.sum(shear))

    dx = grid.dx
    return 0.5 * dx * dx * (kin_x + kin_y + strain_sum + shear_sum)


def _samples(trace) -> np.ndarray:
    if isinstance(trace, TraceSeries):
        return np.asarray(trace.samples, dtype=np.float64)
    return np.asarray(trace, dtype=np.float64)


def compare_traces(a, b) -> dict:
    """Compare a trace against a reference trace b.

    Returns l2_rel = ||a-b|| / ||b||, linf_rel = max|a-b| / max|b|, and the
    zero-lag normalized cross-correlation sum(a b) / (||a|| ||b||).
    """
    a, b = _samples(a), _samples(b)
    if a.shape != b.shape:
        raise ValueError(f"trace length mismatch: {a.shape} vs {b.shape}")
    norm_b = float(np.linalg.norm(b))
    norm_a = float(np.linalg.norm(a))
    diff = a - b
    l2 = float(np.linalg.norm(diff))
    linf = float(np.max(np.abs(diff))) if diff.size else 0.0
    peak_b = float(np.max(np.abs(b))) if b.size else 0.0

    def rel(x, scale):
        if scale > 0.0:
            return x / scale
        return 0.0 if x == 0.0 else float("inf")

    corr = (
        float(np.dot(a, b)) / (norm_a * norm_b)
        if norm_a > 0.0 and norm_b > 0.0
        else 0.0
    )
    return {
        "l2_rel": rel(l2, norm_b),
        "linf_rel": rel(linf, peak_b),
        "lag0_correlation": corr,
    }


def energy_drift(series: EnergySeries, t_source_off: float) -> dict:
    """Flatness metrics over the post-source window t > t_source_off.

    rel_deviation is max |E - mean| / |mean|; trend_slope is the
    least-squares slope of E against t.  A single-sample window has slope
    zero by convention; an empty window is an error.
    """
    keep = series.times > t_source_off
    if not keep.any():
        raise ValueError(
            f"no energy samples after t_source_off={t_source_off!r}"
        )
    t = series.times[keep]
    e = series.values[keep]
    mean = float(np.mean(e))
    dev = float(np.max(np.abs(e - mean)))
    if mean != 0.0:
        rel_dev = dev / abs(mean)
    else:
        rel_dev = 0.0 if dev == 0.0 else float("inf")
    if len(t) < 2:
        slope = 0.0
    else:
        tc = t - t.mean()
        slope = float(np.dot(tc, e) / np.dot(tc, tc))
    return {"rel_deviation": rel_dev, "trend_slope": slope}
