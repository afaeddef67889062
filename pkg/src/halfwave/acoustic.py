"""Acoustic leapfrog solver on a fully periodic staggered grid.

The first-order system couples pressure P (cell centers) with the two
velocity components (faces):

    rho dVx/dt = dP/dx        rho dVy/dt = dP/dy
    beta dP/dt = dVx/dx + dVy/dy + s_p

Each step updates the velocities from the current pressure, then the
pressure from the new velocities.  Right-hand sides are assembled in the
stencil precision; the division by the medium, the point-source add, the
dt scaling, and the solution accumulation all happen in the update
precision.  In baseline mode the accumulation is a plain rounded add; in
compensated mode each field carries a residual field and the add is an
error-free transformation, which is the whole point of this code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import EnergySeries, RunOutput, TraceSeries, acoustic_energy
from .efsum import Variant
from .grids import Field2D, GridSpec, Medium, MediumKind, Stagger
from .precision import Precision
from .sources import SourceKind, SourceSpec, sample_source
from .stencil import StencilSpec, ddx_work, ddy_work_periodic
from .stepping import UpdatePipeline, check_finite

DEFAULT_ENERGY_EVERY = 10


@dataclass
class AcousticState:
    """Solution fields plus one residual field per solution field.

    In compensated mode the residual fields carry the error-free-transform
    leftovers between steps; in baseline mode they are scratch and stay
    zero.  step counts completed time steps.
    """

    p: Field2D
    vx: Field2D
    vy: Field2D
    rp: Field2D
    rvx: Field2D
    rvy: Field2D
    step: int = 0


class AcousticSolver:
    """Owns the precomputed per-run pieces: grid, rounded medium, stencils."""

    def __init__(
        self,
        grid: GridSpec,
        medium: Medium,
        source: SourceSpec | None = None,
        *,
        stencil_precision: Precision = Precision.FP64,
        update_precision: Precision | None = None,
        receivers: tuple = (),
        energy_every: int = DEFAULT_ENERGY_EVERY,
    ):
        if grid.free_surface_y:
            raise ValueError("the acoustic solver supports periodic boundaries only")
        if medium.kind is not MediumKind.ACOUSTIC:
            raise ValueError("acoustic solver needs an acoustic medium")
        if (medium.ny, medium.nx) != (grid.ny, grid.nx):
            raise ValueError(
                f"medium is {medium.nx}x{medium.ny}, grid is {grid.nx}x{grid.ny}"
            )
        medium.validate()
        grid.check_cfl(medium.c_max())
        if source is not None:
            if source.kind is not SourceKind.PRESSURE_POINT:
                raise ValueError("acoustic runs drive a pressure point source")
            self._check_index("source", source.ix, source.iy, grid)
        for ix, iy in receivers:
            self._check_index("receiver", ix, iy, grid)
        if energy_every < 1:
            raise ValueError("energy_every must be at least 1")

        self.grid = grid
        self.medium = medium
        self.source = source
        self.receivers = tuple(receivers)
        self.energy_every = energy_every
        up = update_precision if update_precision is not None else stencil_precision
        self.update_precision = up
        self.pipe = UpdatePipeline(stencil_precision, up, grid.dt)
        self.stencil = StencilSpec.make(stencil_precision, grid.dx)
        self._beta = self.pipe.update_plane(medium.planes["beta"])
        self._rho_x = self.pipe.update_plane(medium.planes["rho_x"])
        self._rho_y = self.pipe.update_plane(medium.planes["rho_y"])

    @staticmethod
    def _check_index(what: str, ix: int, iy: int, grid: GridSpec) -> None:
        if not (0 <= ix < grid.nx and 0 <= iy < grid.ny):
            raise ValueError(f"{what} index ({ix}, {iy}) is outside the grid")

    def new_state(self) -> AcousticState:
        f = lambda st: Field2D.zeros(self.grid, st, self.update_precision)
        return AcousticState(
            p=f(Stagger.CELL), vx=f(Stagger.XFACE), vy=f(Stagger.YFACE),
            rp=f(Stagger.CELL), rvx=f(Stagger.XFACE), rvy=f(Stagger.YFACE),
        )

    # -- single steps ---------------------------------------------------------

    def step_baseline(self, state: AcousticState) -> AcousticState:
        return self._step(state, None)

    def step_compensated(
        self, state: AcousticState, variant: Variant = Variant.OP3
    ) -> AcousticState:
        return self._step(state, variant)

    def _step(self, state: AcousticState, variant: Variant | None) -> AcousticState:
        work = self._load_work(state)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            self._step_work(work, state.step, variant)
        self._flush_work(work, state)
        state.step += 1
        self._check_work(work, state.step - 1)
        return state

    # -- work arrays ------------------------------------------------------------
    #
    # A full run keeps every field in its lane working container between
    # steps (for FP16 that is a float32 array holding lattice-exact values)
    # instead of converting to and from 16-bit storage on each one; loads
    # and stores are exact, so the two layouts compute identical bits.

    def _load_work(self, state: AcousticState) -> dict:
        load = self.pipe.ln_u.load
        return {
            "p": load(state.p.values), "vx": load(state.vx.values),
            "vy": load(state.vy.values), "rp": load(state.rp.values),
            "rvx": load(state.rvx.values), "rvy": load(state.rvy.values),
        }

    def _flush_work(self, work: dict, state: AcousticState) -> None:
        store = self.pipe.ln_u.store
        state.p.values = store(work["p"])
        state.vx.values = store(work["vx"])
        state.vy.values = store(work["vy"])
        state.rp.values = store(work["rp"])
        state.rvx.values = store(work["rvx"])
        state.rvy.values = store(work["rvy"])

    @staticmethod
    def _check_work(work: dict, step_index: int) -> None:
        check_finite(
            step_index,
            {"P": work["p"], "Vx": work["vx"], "Vy": work["vy"],
             "Rp": work["rp"], "Rvx": work["rvx"], "Rvy": work["rvy"]},
        )

    def _step_work(self, work: dict, step_index: int, variant: Variant | None) -> None:
        pipe, ln_s = self.pipe, self.pipe.ln_s
        coeffs = self.stencil.coefficients

        p_s = pipe.to_stencil(work["p"])
        x = pipe.increment(ddx_work(ln_s, p_s, False, coeffs), self._rho_x)
        work["vx"], work["rvx"] = pipe.advance(work["vx"], work["rvx"], x, variant)
        x = pipe.increment(ddy_work_periodic(ln_s, p_s, False, coeffs), self._rho_y)
        work["vy"], work["rvy"] = pipe.advance(work["vy"], work["rvy"], x, variant)

        divergence = ln_s.add(
            ddx_work(ln_s, pipe.to_stencil(work["vx"]), True, coeffs),
            ddy_work_periodic(ln_s, pipe.to_stencil(work["vy"]), True, coeffs),
        )
        src = None
        if self.source is not None:
            t = (step_index + 0.5) * self.grid.dt
            src = (self.source.iy, self.source.ix, sample_source(self.source, t))
        x = pipe.increment(divergence, self._beta, source=src)
        work["p"], work["rp"] = pipe.advance(work["p"], work["rp"], x, variant)

    # -- full runs -------------------------------------------------------------

    def run(
        self, variant: Variant | None = None, state: AcousticState | None = None
    ) -> RunOutput:
        """March nt steps, recording receiver traces and the energy history.

        variant None runs the baseline update; OP3/OP6 run the compensated
        update.  Receiver pressure is sampled right after the pressure
        update.  Energy pairs the pressure levels around each sampled step
        and is also recorded once for the initial state.
        """
        grid, medium = self.grid, self.medium
        state = state if state is not None else self.new_state()
        nt, every = grid.nt, self.energy_every

        work = self._load_work(state)
        step0, done = state.step, 0
        trace_data = np.empty((len(self.receivers), nt), dtype=np.float64)
        times = [0.0]
        values = [
            acoustic_energy(
                work["p"], work["p"], work["vx"], work["vy"], medium, grid.dx
            )
        ]
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                for n in range(nt):
                    sample_energy = (n + 1) % every == 0
                    if sample_energy:
                        p_prev = np.ascontiguousarray(work["p"], dtype=np.float64)
                    self._step_work(work, step0 + n, variant)
                    done = n + 1
                    self._check_work(work, step0 + n)
                    for j, (ix, iy) in enumerate(self.receivers):
                        trace_data[j, n] = float(work["p"][iy, ix])
                    if sample_energy:
                        values.append(
                            acoustic_energy(
                                p_prev, work["p"], work["vx"], work["vy"],
                                medium, grid.dx,
                            )
                        )
                        times.append((n + 0.5) * grid.dt)
        finally:
            self._flush_work(work, state)
            state.step = step0 + done

        traces = [
            TraceSeries("p", ix, iy, trace_data[j])
            for j, (ix, iy) in enumerate(self.receivers)
        ]
        energy = EnergySeries(np.asarray(times), np.asarray(values))
        return RunOutput(traces, energy, {"range_failure": None})
