"""Acoustic leapfrog solver: impulse oracle, invariants, validation."""

import math

import numpy as np
import pytest

from halfwave.acoustic import AcousticSolver
from halfwave.diagnostics import RangeFailureError, compare_traces
from halfwave.efsum import Variant
from halfwave.grids import Boundary, GridSpec, build_homogeneous_acoustic, build_layered_elastic
from halfwave.precision import Precision, p_div, p_mul, round_to
from halfwave.sources import RickerSpec, SourceKind, SourceSpec, ricker, sample_source

# Exactly representable in binary16, so every precision sees the same clock.
DT16 = float(np.float16(4e-4))


def small_grid(n=16, nt=30, dt=DT16):
    return GridSpec(nx=n, ny=n, dx=0.032, dt=dt, nt=nt)


def unit_medium(n=16):
    return build_homogeneous_acoustic(n, n, rho=1.0, c=1.0)


def point_source(n=16, f=5.0, amplitude=1000.0):
    w = RickerSpec(f_center=f, amplitude=amplitude)
    return SourceSpec(SourceKind.PRESSURE_POINT, n // 2, n // 2, w)


# ---------------------------------------------------------------- wavelet

def test_ricker_peak_equals_amplitude():
    w = RickerSpec(f_center=2.5, delay=0.3, amplitude=7.25)
    assert ricker(0.3, w) == 7.25


def test_ricker_default_delay_start_value():
    # Frozen against an 80-bit evaluation of (1 - 2a) exp(-a), a = (1.2 pi)^2.
    # The start sample under the default delay is 1.8e-5 of the peak.
    w = RickerSpec(f_center=4.0, amplitude=1.0)
    assert w.delay == 1.2 / 4.0
    assert ricker(0.0, w) == pytest.approx(-1.8443565585705504e-05, rel=1e-13)


def test_ricker_frozen_sample():
    # Frozen against the same 80-bit oracle at an arbitrary off-peak point.
    w = RickerSpec(f_center=2.0, delay=0.6, amplitude=3.5)
    assert ricker(0.85, w) == pytest.approx(-1.167917773037643, rel=1e-14)


def test_ricker_zero_crossing():
    # (1 - 2a) vanishes at tau = 1/(pi f sqrt(2)).
    f = 2.5
    w = RickerSpec(f_center=f, delay=0.0, amplitude=1.0)
    tau0 = 1.0 / (math.pi * f * math.sqrt(2.0))
    # rounding tau0 itself already perturbs the value by ~1 ulp of exp(-1/2)
    assert abs(ricker(tau0, w)) < 5e-16


def test_ricker_rejects_bad_parameters():
    with pytest.raises(ValueError):
        RickerSpec(f_center=0.0)
    with pytest.raises(ValueError):
        RickerSpec(f_center=1.0, delay=-0.1)


def test_sample_source_truncates_outside_window():
    w = RickerSpec(f_center=5.0, amplitude=2.0)
    spec = SourceSpec(SourceKind.PRESSURE_POINT, 0, 0, w)
    assert sample_source(spec, -1e-9) == 0.0
    assert sample_source(spec, 2.0 * w.delay) == ricker(2.0 * w.delay, w)
    assert sample_source(spec, 2.0 * w.delay + 1e-9) == 0.0
    # interior samples are the plain wavelet
    assert sample_source(spec, w.delay) == 2.0


# ---------------------------------------------------------------- zero runs

@pytest.mark.parametrize("precision", [Precision.FP16, Precision.FP64])
@pytest.mark.parametrize("variant", [None, Variant.OP3])
def test_no_source_stays_identically_zero(precision, variant):
    grid = small_grid(nt=25)
    solver = AcousticSolver(
        grid, unit_medium(), None,
        stencil_precision=precision, update_precision=precision,
        receivers=((3, 4),),
    )
    out = solver.run(variant)
    assert np.all(out.traces[0].samples == 0.0)
    assert np.all(out.energy.values == 0.0)
    assert out.flags["range_failure"] is None


# ---------------------------------------------------------------- impulse oracle

@pytest.mark.parametrize(
    "stencil_p,update_p",
    [
        (Precision.FP64, Precision.FP64),
        (Precision.FP16, Precision.FP16),
        (Precision.FP64, Precision.FP16),
    ],
)
def test_first_step_injects_scalar_oracle_value(stencil_p, update_p):
    # From rest the velocity updates see a zero field, so after one step the
    # only nonzero sample is the source cell of P:
    #   fl(fl(fl(round(s)) / beta) * dt) with every rounding in the update
    # precision.  The chain below rebuilds that value from scalar ops.
    n = 16
    grid = small_grid(n, nt=4)
    src = point_source(n)
    solver = AcousticSolver(
        grid, unit_medium(n), src,
        stencil_precision=stencil_p, update_precision=update_p,
    )
    state = solver.new_state()
    solver.step_baseline(state)

    s = sample_source(src, 0.5 * grid.dt)
    assert s != 0.0
    x = p_div(update_p, round_to(update_p, s), round_to(update_p, 1.0))
    expected = p_mul(update_p, x, round_to(update_p, grid.dt)).value

    p = state.p.values
    assert float(p[src.iy, src.ix]) == expected
    mask = np.ones_like(p, dtype=bool)
    mask[src.iy, src.ix] = False
    assert np.all(p[mask] == 0.0)
    assert np.all(state.vx.values == 0.0)
    assert np.all(state.vy.values == 0.0)


def test_compensated_first_step_matches_baseline_with_zero_residual():
    n = 16
    grid = small_grid(n, nt=4)
    src = point_source(n)
    solver = AcousticSolver(
        grid, unit_medium(n), src,
        stencil_precision=Precision.FP16, update_precision=Precision.FP16,
    )
    a = solver.new_state()
    b = solver.new_state()
    solver.step_baseline(a)
    solver.step_compensated(b)
    assert np.array_equal(a.p.values, b.p.values)
    # adding the impulse to a zero field is exact, so no residual survives
    assert np.all(b.rp.values == 0.0)
    assert np.all(b.rvx.values == 0.0)


def test_receiver_at_source_records_post_update_pressure():
    n = 16
    grid = small_grid(n, nt=2)
    src = point_source(n)
    solver = AcousticSolver(
        grid, unit_medium(n), src,
        stencil_precision=Precision.FP64, update_precision=Precision.FP64,
        receivers=((src.ix, src.iy),),
    )
    out = solver.run()
    s = sample_source(src, 0.5 * grid.dt)
    x = p_div(Precision.FP64, round_to(Precision.FP64, s), round_to(Precision.FP64, 1.0))
    expected = p_mul(Precision.FP64, x, round_to(Precision.FP64, grid.dt)).value
    assert out.traces[0].samples[0] == expected


# ---------------------------------------------------------------- fp64 invariants

def test_fp64_compensation_is_inert():
    # At working precision the residual stream stays at rounding level, so
    # baseline and compensated traces agree far beyond any physical signal.
    n = 100
    grid = GridSpec(nx=n, ny=n, dx=0.032, dt=DT16, nt=800)
    medium = build_homogeneous_acoustic(n, n, rho=1.0, c=1.0)
    w = RickerSpec(f_center=1.25, amplitude=100.0)
    src = SourceSpec(SourceKind.PRESSURE_POINT, 33, 33, w)
    mk = lambda: AcousticSolver(
        grid, medium, src,
        stencil_precision=Precision.FP64, receivers=((60, 60),),
    )
    base = mk().run()
    comp = mk().run(Variant.OP3)
    rel = compare_traces(comp.traces[0], base.traces[0])
    assert rel["l2_rel"] <= 1e-12


def test_same_configuration_reruns_bit_identical():
    n = 24
    grid = small_grid(n, nt=60)
    src = point_source(n, f=8.0, amplitude=50.0)
    mk = lambda: AcousticSolver(
        grid, unit_medium(n), src,
        stencil_precision=Precision.FP16, update_precision=Precision.FP16,
        receivers=((5, 7), (12, 3)),
    )
    a = mk().run(Variant.OP3)
    b = mk().run(Variant.OP3)
    for ta, tb in zip(a.traces, b.traces):
        assert ta.samples.tobytes() == tb.samples.tobytes()
    assert a.energy.values.tobytes() == b.energy.values.tobytes()


# ---------------------------------------------------------------- bookkeeping

def test_nt_zero_yields_initial_energy_only():
    grid = small_grid(nt=0)
    solver = AcousticSolver(grid, unit_medium(), point_source(), receivers=((1, 1),))
    out = solver.run()
    assert out.traces[0].samples.shape == (0,)
    assert list(out.energy.times) == [0.0]
    assert out.energy.values[0] == 0.0


def test_energy_sampling_times_follow_cadence():
    grid = small_grid(nt=25)
    solver = AcousticSolver(grid, unit_medium(), point_source(), energy_every=10)
    out = solver.run()
    dt = grid.dt
    assert np.array_equal(out.energy.times, [0.0, 9.5 * dt, 19.5 * dt])


def test_energy_cadence_one_samples_every_step():
    grid = small_grid(nt=5)
    solver = AcousticSolver(grid, unit_medium(), point_source(), energy_every=1)
    out = solver.run()
    assert len(out.energy.times) == 6


# ---------------------------------------------------------------- failure paths

def test_overflow_raises_range_failure_with_field_name():
    n = 16
    grid = small_grid(n, nt=400)
    src = point_source(n, f=5.0, amplitude=1e9)
    solver = AcousticSolver(
        grid, unit_medium(n), src,
        stencil_precision=Precision.FP16, update_precision=Precision.FP16,
    )
    with pytest.raises(RangeFailureError) as err:
        solver.run()
    assert err.value.field_name == "P"
    assert "P" in str(err.value)
    assert err.value.step >= 0


def test_validation_rejects_bad_setups():
    grid = small_grid()
    medium = unit_medium()
    with pytest.raises(ValueError, match="periodic"):
        AcousticSolver(
            GridSpec(16, 16, 0.032, DT16, 10, bc_y=Boundary.FREE_SURFACE),
            medium,
        )
    with pytest.raises(ValueError, match="acoustic medium"):
        layers = [(1.0, 2.0, 3.0, 1.5)]
        AcousticSolver(grid, build_layered_elastic(16, 16, layers))
    with pytest.raises(ValueError):
        AcousticSolver(grid, build_homogeneous_acoustic(8, 8, rho=1.0, c=1.0))
    with pytest.raises(ValueError):  # CFL: dt c / dx = 1 > 6/(7 sqrt 2)
        AcousticSolver(GridSpec(16, 16, 0.032, 0.032, 10), medium)
    with pytest.raises(ValueError, match="pressure point"):
        w = RickerSpec(f_center=5.0)
        AcousticSolver(grid, medium, SourceSpec(SourceKind.VY_POINT, 2, 2, w))
    with pytest.raises(ValueError, match="outside"):
        AcousticSolver(grid, medium, receivers=((16, 0),))
    with pytest.raises(ValueError, match="outside"):
        w = RickerSpec(f_center=5.0)
        AcousticSolver(grid, medium, SourceSpec(SourceKind.PRESSURE_POINT, -1, 0, w))
    with pytest.raises(ValueError, match="energy_every"):
        AcousticSolver(grid, medium, energy_every=0)
