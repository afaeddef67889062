"""Velocity-stress elastic solver, periodic in x, periodic or free-surface y.

The isotropic first-order system on the staggered grid:

    rho dVx/dt  = dSxx/dx + dSxy/dy
    rho dVy/dt  = dSxy/dx + dSyy/dy + s_vy
    dSxx/dt = (lam + 2 mu) dVx/dx + lam dVy/dy
    dSyy/dt = lam dVx/dx + (lam + 2 mu) dVy/dy
    dSxy/dt = mu (dVx/dy + dVy/dx)

Velocities update from the current stresses, then stresses from the new
velocities.  The precision pipeline matches the acoustic solver: stencil
taps and the medium multiplies run in the stencil precision, then the
demoted increment is divided (velocities only), scaled by dt, and
accumulated in the update precision, plainly or through an error-free
transformation.

Free surfaces sit on the integer-y rows at both ends of the domain.  Syy
is antisymmetric across them and stays exactly zero on the surface rows;
Sxy is antisymmetric about the half-row images; Vx and Vy reflect
symmetrically.  On the surface rows the Syy increment is zeroed and Sxx
is driven through the plane-stress modulus 4 mu (lam + mu) / (lam + 2 mu)
acting on dVx/dx alone, which is what keeps the discrete energy flat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import EnergySeries, RunOutput, TraceSeries, elastic_energy
from .efsum import Variant
from .grids import Field2D, GridSpec, Medium, MediumKind, Stagger, extend_rows
from .precision import Precision
from .sources import SourceKind, SourceSpec, sample_source
from .stencil import Parity, StencilSpec, ddx_work, ddy_work_free, ddy_work_periodic
from .stepping import UpdatePipeline, check_finite

DEFAULT_ENERGY_EVERY = 10


@dataclass
class ElasticState:
    """Five solution fields plus their residuals, as in AcousticState."""

    vx: Field2D
    vy: Field2D
    sxx: Field2D
    syy: Field2D
    sxy: Field2D
    rvx: Field2D
    rvy: Field2D
    rsxx: Field2D
    rsyy: Field2D
    rsxy: Field2D
    step: int = 0


class ElasticSolver:
    """Grid, rounded medium planes, and stencils fixed once per run."""

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
        if medium.kind is not MediumKind.ELASTIC:
            raise ValueError("elastic solver needs an elastic medium")
        if (medium.ny, medium.nx) != (grid.ny, grid.nx):
            raise ValueError(
                f"medium is {medium.nx}x{medium.ny}, grid is {grid.nx}x{grid.ny}"
            )
        medium.validate()
        grid.check_cfl(medium.c_max())
        if source is not None:
            if source.kind is not SourceKind.VY_POINT:
                raise ValueError("elastic runs drive a vertical-velocity point source")
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

        pipe = self.pipe
        lam = medium.planes["lam"]
        mu = medium.planes["mu"]
        self._rho_x = pipe.update_plane(extend_rows(medium.planes["rho_x"], grid, Stagger.XFACE))
        self._rho_y = pipe.update_plane(medium.planes["rho_y"])
        self._stiff = pipe.stencil_plane(extend_rows(lam + 2.0 * mu, grid, Stagger.CELL))
        self._lam = pipe.stencil_plane(extend_rows(lam, grid, Stagger.CELL))
        # node rows reuse the cell-row shear modulus
        self._mu_n = pipe.stencil_plane(mu)
        if grid.free_surface_y:
            ep = extend_rows(4.0 * mu * (lam + mu) / (lam + 2.0 * mu), grid, Stagger.CELL)
            self._ep_top = pipe.stencil_plane(ep[0])
            self._ep_bot = pipe.stencil_plane(ep[-1])

    @staticmethod
    def _check_index(what: str, ix: int, iy: int, grid: GridSpec) -> None:
        # sources and receivers live on the Vy sub-grid, ny rows either way
        if not (0 <= ix < grid.nx and 0 <= iy < grid.ny):
            raise ValueError(f"{what} index ({ix}, {iy}) is outside the grid")

    def new_state(self) -> ElasticState:
        f = lambda st: Field2D.zeros(self.grid, st, self.update_precision)
        return ElasticState(
            vx=f(Stagger.XFACE), vy=f(Stagger.YFACE),
            sxx=f(Stagger.CELL), syy=f(Stagger.CELL), sxy=f(Stagger.NODE),
            rvx=f(Stagger.XFACE), rvy=f(Stagger.YFACE),
            rsxx=f(Stagger.CELL), rsyy=f(Stagger.CELL), rsxy=f(Stagger.NODE),
        )

    # -- single steps ---------------------------------------------------------

    def step_baseline(self, state: ElasticState) -> ElasticState:
        return self._step(state, None)

    def step_compensated(
        self, state: ElasticState, variant: Variant = Variant.OP6
    ) -> ElasticState:
        return self._step(state, variant)

    def _step(self, state: ElasticState, variant: Variant | None) -> ElasticState:
        work = self._load_work(state)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            self._step_work(work, state.step, variant)
        self._flush_work(work, state)
        state.step += 1
        self._check_work(work, state.step - 1)
        return state

    # -- work arrays ------------------------------------------------------------
    #
    # As in the acoustic solver, a full run keeps the fields in their lane
    # working containers between steps; loads and stores are exact, so this
    # computes the same bits as stepping through 16-bit storage.

    _FIELDS = ("vx", "vy", "sxx", "syy", "sxy", "rvx", "rvy", "rsxx", "rsyy", "rsxy")

    def _load_work(self, state: ElasticState) -> dict:
        load = self.pipe.ln_u.load
        return {name: load(getattr(state, name).values) for name in self._FIELDS}

    def _flush_work(self, work: dict, state: ElasticState) -> None:
        store = self.pipe.ln_u.store
        for name in self._FIELDS:
            getattr(state, name).values = store(work[name])

    @staticmethod
    def _check_work(work: dict, step_index: int) -> None:
        check_finite(
            step_index,
            {"Vx": work["vx"], "Vy": work["vy"], "Sxx": work["sxx"],
             "Syy": work["syy"], "Sxy": work["sxy"], "Rvx": work["rvx"],
             "Rvy": work["rvy"], "Rsxx": work["rsxx"], "Rsyy": work["rsyy"],
             "Rsxy": work["rsxy"]},
        )

    def _step_work(self, work: dict, step_index: int, variant: Variant | None) -> None:
        pipe, ln_s = self.pipe, self.pipe.ln_s
        coeffs = self.stencil.coefficients
        fs = self.grid.free_surface_y

        sxx_s = pipe.to_stencil(work["sxx"])
        syy_s = pipe.to_stencil(work["syy"])
        sxy_s = pipe.to_stencil(work["sxy"])
        if fs:
            dsxy_y = ddy_work_free(ln_s, sxy_s, True, Parity.ODD, coeffs)
            dsyy_y = ddy_work_free(ln_s, syy_s, False, Parity.ODD, coeffs)
        else:
            dsxy_y = ddy_work_periodic(ln_s, sxy_s, True, coeffs)
            dsyy_y = ddy_work_periodic(ln_s, syy_s, False, coeffs)

        x = pipe.increment(
            ln_s.add(ddx_work(ln_s, sxx_s, False, coeffs), dsxy_y), self._rho_x
        )
        work["vx"], work["rvx"] = pipe.advance(work["vx"], work["rvx"], x, variant)

        src = None
        if self.source is not None:
            t = step_index * self.grid.dt
            src = (self.source.iy, self.source.ix, sample_source(self.source, t))
        x = pipe.increment(
            ln_s.add(ddx_work(ln_s, sxy_s, True, coeffs), dsyy_y),
            self._rho_y,
            source=src,
        )
        work["vy"], work["rvy"] = pipe.advance(work["vy"], work["rvy"], x, variant)

        vx_s = pipe.to_stencil(work["vx"])
        vy_s = pipe.to_stencil(work["vy"])
        dvx = ddx_work(ln_s, vx_s, True, coeffs)
        if fs:
            dvy = ddy_work_free(ln_s, vy_s, True, Parity.EVEN, coeffs)
        else:
            dvy = ddy_work_periodic(ln_s, vy_s, True, coeffs)

        rhs = ln_s.add(ln_s.mul(self._stiff, dvx), ln_s.mul(self._lam, dvy))
        if fs:
            # plane-stress surface rows: no dVy/dy contribution
            rhs[0] = ln_s.mul(self._ep_top, dvx[0])
            rhs[-1] = ln_s.mul(self._ep_bot, dvx[-1])
        x = pipe.increment(rhs)
        work["sxx"], work["rsxx"] = pipe.advance(work["sxx"], work["rsxx"], x, variant)

        rhs = ln_s.add(ln_s.mul(self._lam, dvx), ln_s.mul(self._stiff, dvy))
        if fs:
            # Syy is pinned to zero on the surfaces; a zero increment keeps
            # the rows (and their residuals) exactly zero in every precision
            rhs[0] = 0.0
            rhs[-1] = 0.0
        x = pipe.increment(rhs)
        work["syy"], work["rsyy"] = pipe.advance(work["syy"], work["rsyy"], x, variant)

        if fs:
            dvx_y = ddy_work_free(ln_s, vx_s, False, Parity.EVEN, coeffs)
        else:
            dvx_y = ddy_work_periodic(ln_s, vx_s, False, coeffs)
        rhs = ln_s.mul(self._mu_n, ln_s.add(dvx_y, ddx_work(ln_s, vy_s, False, coeffs)))
        x = pipe.increment(rhs)
        work["sxy"], work["rsxy"] = pipe.advance(work["sxy"], work["rsxy"], x, variant)

    # -- full runs -------------------------------------------------------------

    def run(
        self, variant: Variant | None = None, state: ElasticState | None = None
    ) -> RunOutput:
        """March nt steps, recording Vy receiver traces and the energy history.

        Stresses live on integer step levels and velocities on half levels,
        so each sampled energy pairs the stress fields around a step with
        the velocities inside it, mirroring the acoustic pressure pairing.
        """
        grid, medium = self.grid, self.medium
        state = state if state is not None else self.new_state()
        nt, every = grid.nt, self.energy_every

        work = self._load_work(state)
        step0, done = state.step, 0

        def stresses():
            return (work["sxx"], work["syy"], work["sxy"])

        def snapshot():
            return tuple(np.ascontiguousarray(s, dtype=np.float64) for s in stresses())

        trace_data = np.empty((len(self.receivers), nt), dtype=np.float64)
        times = [0.0]
        values = [
            elastic_energy(stresses(), stresses(), work["vx"], work["vy"], medium, grid)
        ]
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                for n in range(nt):
                    sample_energy = (n + 1) % every == 0
                    if sample_energy:
                        prev = snapshot()
                    self._step_work(work, step0 + n, variant)
                    done = n + 1
                    self._check_work(work, step0 + n)
                    for j, (ix, iy) in enumerate(self.receivers):
                        trace_data[j, n] = float(work["vy"][iy, ix])
                    if sample_energy:
                        values.append(
                            elastic_energy(
                                prev, stresses(), work["vx"], work["vy"], medium, grid
                            )
                        )
                        times.append((n + 0.5) * grid.dt)
        finally:
            self._flush_work(work, state)
            state.step = step0 + done

        traces = [
            TraceSeries("vy", ix, iy, trace_data[j])
            for j, (ix, iy) in enumerate(self.receivers)
        ]
        energy = EnergySeries(np.asarray(times), np.asarray(values))
        return RunOutput(traces, energy, {"range_failure": None})
