"""Staggered-grid geometry, field storage, and medium construction.

Arrays are indexed [iy, ix] (y selects the row).  Four sub-grids stagger the
fields in space; a point of sub-grid S at index (ix, iy) sits at physical
position ((ix + Sx/2) dx, (iy + Sy/2) dx) with Sx, Sy in {0, 1}:

    Cell  (0, 0)   pressure / normal stresses and their coefficients
    XFace (1, 0)   x velocity
    YFace (0, 1)   y velocity
    Node  (1, 1)   shear stress

x is periodic.  y is periodic or bounded by free surfaces on both ends; with
free surfaces the integer-y sub-grids (Cell, XFace) carry one extra row, so
the boundary rows lie exactly on the two surfaces.

Media are kept in binary64 as the source of truth and rounded into a
simulation precision once per run, so parameter rounding is a fixed
perturbation of the problem rather than a per-step noise source.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .precision import DTYPES, Precision

# amplification bound of the 4th-order in space, leapfrog in time scheme:
# the spatial symbol peaks at (9/8 + 1/24)*2 per axis, sqrt(2) for 2D, and
# leapfrog tolerates |omega*dt| <= 2, giving c*dt/dx <= 6/(7*sqrt(2))
CFL_LIMIT = 6.0 / (7.0 * math.sqrt(2.0))


class Stagger(enum.Enum):
    """Sub-grid offsets in half-cell units (x_half, y_half)."""

    CELL = (0, 0)
    XFACE = (1, 0)
    YFACE = (0, 1)
    NODE = (1, 1)

    @property
    def half_x(self) -> bool:
        return bool(self.value[0])

    @property
    def half_y(self) -> bool:
        return bool(self.value[1])

    def coords(self, n: int, dx: float, axis: int) -> np.ndarray:
        off = 0.5 * self.value[axis]
        return (np.arange(n) + off) * dx


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    FREE_SURFACE = "free-surface"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class GridSpec:
    """Uniform 2D grid with its time axis and boundary conditions."""

    nx: int
    ny: int
    dx: float
    dt: float
    nt: int
    bc_x: Boundary = Boundary.PERIODIC
    bc_y: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.nx}x{self.ny}")
        if not (self.dx > 0.0 and self.dt > 0.0):
            raise ValueError("dx and dt must be positive")
        if self.nt < 0:
            raise ValueError("nt must be nonnegative")
        if self.bc_x is not Boundary.PERIODIC:
            raise ValueError("x boundary must be periodic; free surfaces are y-only")

    @property
    def free_surface_y(self) -> bool:
        return self.bc_y is Boundary.FREE_SURFACE

    def rows(self, stagger: Stagger) -> int:
        """Number of y rows a field on this sub-grid carries."""
        if self.free_surface_y and not stagger.half_y:
            return self.ny + 1
        return self.ny

    def shape(self, stagger: Stagger) -> tuple[int, int]:
        return (self.rows(stagger), self.nx)

    def cfl(self, c_max: float) -> float:
        return c_max * self.dt / self.dx

    def check_cfl(self, c_max: float) -> None:
        got = self.cfl(c_max)
        if got > CFL_LIMIT:
            raise ValueError(
                f"CFL number {got:.6g} exceeds the stability bound {CFL_LIMIT:.6g} "
                f"(c_max={c_max:.6g}, dt={self.dt:.6g}, dx={self.dx:.6g})"
            )


@dataclass
class Field2D:
    """One staggered field in its storage precision."""

    values: np.ndarray
    stagger: Stagger

    @classmethod
    def zeros(cls, grid: GridSpec, stagger: Stagger, precision: Precision) -> "Field2D":
        return cls(np.zeros(grid.shape(stagger), dtype=DTYPES[precision]), stagger)


class MediumKind(enum.Enum):
    ACOUSTIC = 0
    ELASTIC = 1


# canonical plane names and the sub-grid each one feeds
PLANE_ORDER = {
    MediumKind.ACOUSTIC: ("rho_x", "rho_y", "beta"),
    MediumKind.ELASTIC: ("rho_x", "rho_y", "lam", "mu"),
}
PLANE_STAGGER = {
    "rho_x": Stagger.XFACE,
    "rho_y": Stagger.YFACE,
    "beta": Stagger.CELL,
    "lam": Stagger.CELL,
    "mu": Stagger.CELL,
}


@dataclass(frozen=True)
class Medium:
    """Material parameters as binary64 planes of shape (ny, nx)."""

    kind: MediumKind
    nx: int
    ny: int
    planes: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        want = PLANE_ORDER[self.kind]
        if tuple(self.planes) != want:
            raise ValueError(f"expected planes {want}, got {tuple(self.planes)}")
        for name, plane in self.planes.items():
            if plane.shape != (self.ny, self.nx) or plane.dtype != np.float64:
                raise ValueError(f"plane {name} must be float64 of shape (ny, nx)")

    def _first_bad(self, name: str, bad: np.ndarray) -> str:
        iy, ix = map(int, np.argwhere(bad)[0])
        return f"{name}[ix={ix}, iy={iy}] = {self.planes[name][iy, ix]!r}"

    def validate(self) -> None:
        for name, plane in self.planes.items():
            if not np.isfinite(plane).all():
                raise ValueError(f"non-finite medium entry at {self._first_bad(name, ~np.isfinite(plane))}")
        if self.kind is MediumKind.ACOUSTIC:
            for name in ("rho_x", "rho_y", "beta"):
                bad = self.planes[name] <= 0.0
                if bad.any():
                    raise ValueError(f"nonpositive medium entry at {self._first_bad(name, bad)}")
        else:
            for name in ("rho_x", "rho_y"):
                bad = self.planes[name] <= 0.0
                if bad.any():
                    raise ValueError(f"nonpositive medium entry at {self._first_bad(name, bad)}")
            bad = self.planes["mu"] < 0.0
            if bad.any():
                raise ValueError(f"negative shear modulus at {self._first_bad('mu', bad)}")
            stiff = self.planes["lam"] + 2.0 * self.planes["mu"]
            if (stiff <= 0.0).any():
                iy, ix = map(int, np.argwhere(stiff <= 0.0)[0])
                raise ValueError(
                    f"lam + 2 mu must be positive, got {stiff[iy, ix]!r} at ix={ix}, iy={iy}"
                )

    def c_max(self) -> float:
        """Upper bound on the wave speed, for CFL checking."""
        rho_min = min(self.planes["rho_x"].min(), self.planes["rho_y"].min())
        if self.kind is MediumKind.ACOUSTIC:
            return float(1.0 / math.sqrt(rho_min * self.planes["beta"].min()))
        stiff = self.planes["lam"] + 2.0 * self.planes["mu"]
        return float(math.sqrt(stiff.max() / rho_min))


def build_homogeneous_acoustic(nx: int, ny: int, rho: float, c: float) -> Medium:
    """Constant-parameter acoustic medium; beta = 1/(rho c^2)."""
    if not (rho > 0.0 and c > 0.0):
        raise ValueError("rho and c must be positive")
    beta = 1.0 / (rho * c * c)
    full = lambda v: np.full((ny, nx), v, dtype=np.float64)
    return Medium(
        MediumKind.ACOUSTIC,
        nx,
        ny,
        {"rho_x": full(rho), "rho_y": full(rho), "beta": full(beta)},
    )


def build_layered_elastic(nx: int, ny: int, layers) -> Medium:
    """Depth-wise piecewise-constant elastic medium.

    layers: ordered sequence of (depth_fraction, rho, cp, cs); each layer
    extends from the previous fraction of the domain height down to its own.
    lam = rho (cp^2 - 2 cs^2) and mu = rho cs^2.  Each plane samples the
    layer column at that plane's own staggered y coordinates, so interfaces
    land on the rows where each field actually lives.
    """
    layers = list(layers)
    if not layers:
        raise ValueError("at least one layer is required")
    prev = 0.0
    for frac, rho, cp, cs in layers:
        if not frac > prev:
            raise ValueError("layer depth fractions must be strictly increasing")
        prev = frac
        if not (rho > 0.0 and cp > 0.0 and cs >= 0.0):
            raise ValueError("layer parameters must be positive (cs may be zero)")
        if cs >= cp:
            raise ValueError(f"shear speed {cs} must be below pressure speed {cp}")
    if layers[-1][0] < 1.0:
        raise ValueError("layers must cover the full depth (last fraction >= 1)")

    height = float(ny)  # depth fractions are relative to ny rows

    def column(stagger: Stagger, pick) -> np.ndarray:
        ys = (np.arange(ny) + (0.5 if stagger.half_y else 0.0)) / height
        out = np.empty(ny, dtype=np.float64)
        for j, y in enumerate(ys):
            for frac, rho, cp, cs in layers:
                if y < frac:
                    out[j] = pick(rho, cp, cs)
                    break
            else:
                out[j] = pick(*layers[-1][1:])
        return out

    def plane(stagger: Stagger, pick) -> np.ndarray:
        return np.repeat(column(stagger, pick)[:, None], nx, axis=1)

    rho_of = lambda rho, cp, cs: rho
    lam_of = lambda rho, cp, cs: rho * (cp * cp - 2.0 * cs * cs)
    mu_of = lambda rho, cp, cs: rho * cs * cs
    m = Medium(
        MediumKind.ELASTIC,
        nx,
        ny,
        {
            "rho_x": plane(Stagger.XFACE, rho_of),
            "rho_y": plane(Stagger.YFACE, rho_of),
            "lam": plane(Stagger.CELL, lam_of),
            "mu": plane(Stagger.CELL, mu_of),
        },
    )
    m.validate()
    return m


# --- medium file format ------------------------------------------------------
# little-endian; header: magic "WMED", u32 version=1, u32 kind, u32 nx, u32 ny;
# then the canonical planes in PLANE_ORDER, each ny*nx row-major binary64.

_MAGIC = b"WMED"
_HEADER = struct.Struct("<4s4I")
_VERSION = 1


def save_medium(path, medium: Medium) -> None:
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(_MAGIC, _VERSION, medium.kind.value, medium.nx, medium.ny)
        )
        for name in PLANE_ORDER[medium.kind]:
            f.write(np.ascontiguousarray(medium.planes[name], dtype="<f8").tobytes())


def load_medium(path) -> Medium:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, kind_code, nx, ny = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    try:
        kind = MediumKind(kind_code)
    except ValueError:
        raise ValueError(f"{path}: unknown medium kind {kind_code}") from None
    names = PLANE_ORDER[kind]
    want = _HEADER.size + len(names) * nx * ny * 8
    if len(raw) != want:
        raise ValueError(
            f"{path}: size mismatch, got {len(raw)} bytes, need {want} "
            f"for {len(names)} planes of {nx}x{ny}"
        )
    planes = {}
    for k, name in enumerate(names):
        start = _HEADER.size + k * nx * ny * 8
        data = np.frombuffer(raw, dtype="<f8", count=nx * ny, offset=start)
        planes[name] = data.reshape(ny, nx).astype(np.float64)
    medium = Medium(kind, nx, ny, planes)
    medium.validate()
    return medium


def extend_rows(plane: np.ndarray, grid: GridSpec, stagger: Stagger) -> np.ndarray:
    """Materialize a canonical (ny, nx) plane onto a field's row count.

    Free-surface integer-y sub-grids carry ny+1 rows; the extra bottom row
    duplicates the last canonical row (the medium below the surface is not
    part of the model).
    """
    rows = grid.rows(stagger)
    if rows == plane.shape[0]:
        return plane
    return np.concatenate([plane, plane[-1:, :]], axis=0)
