"""Grid bookkeeping, medium builders, and the medium file format."""

import math

import numpy as np
import pytest

from halfwave.grids import (
    CFL_LIMIT,
    Boundary,
    Field2D,
    GridSpec,
    Medium,
    MediumKind,
    Stagger,
    build_homogeneous_acoustic,
    build_layered_elastic,
    extend_rows,
    load_medium,
    save_medium,
)
from halfwave.precision import Precision, demote


def grid(nx=16, ny=12, bc_y=Boundary.PERIODIC, **kw):
    kw.setdefault("dx", 0.5)
    kw.setdefault("dt", 0.01)
    kw.setdefault("nt", 10)
    return GridSpec(nx=nx, ny=ny, bc_y=bc_y, **kw)


# --- GridSpec ------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValueError):
        grid(nx=7)
    with pytest.raises(ValueError):
        grid(ny=7)
    with pytest.raises(ValueError):
        grid(dx=0.0)
    with pytest.raises(ValueError):
        grid(dt=-1.0)
    with pytest.raises(ValueError):
        grid(nt=-1)
    assert grid(nt=0).nt == 0  # a zero-step run is legal
    with pytest.raises(ValueError):
        GridSpec(nx=16, ny=16, dx=1.0, dt=1.0, nt=1, bc_x=Boundary.FREE_SURFACE)


def test_cfl_limit_value():
    assert CFL_LIMIT == 6.0 / (7.0 * math.sqrt(2.0))
    assert 0.606 < CFL_LIMIT < 0.6061


def test_cfl_check():
    g = grid(dx=1.0, dt=0.5)
    g.check_cfl(1.0)  # 0.5 is inside the bound
    with pytest.raises(ValueError) as err:
        g.check_cfl(1.3)  # 0.65 is outside
    assert "0.65" in str(err.value)
    assert f"{CFL_LIMIT:.6g}" in str(err.value)


def test_shapes_periodic():
    g = grid(nx=16, ny=12)
    for s in Stagger:
        assert g.shape(s) == (12, 16)


def test_shapes_free_surface():
    g = grid(nx=16, ny=12, bc_y=Boundary.FREE_SURFACE)
    assert g.shape(Stagger.CELL) == (13, 16)
    assert g.shape(Stagger.XFACE) == (13, 16)
    assert g.shape(Stagger.YFACE) == (12, 16)
    assert g.shape(Stagger.NODE) == (12, 16)


def test_stagger_coordinates():
    assert np.array_equal(Stagger.CELL.coords(3, 0.5, 0), [0.0, 0.5, 1.0])
    assert np.array_equal(Stagger.XFACE.coords(3, 0.5, 0), [0.25, 0.75, 1.25])
    assert np.array_equal(Stagger.XFACE.coords(3, 0.5, 1), [0.0, 0.5, 1.0])
    assert np.array_equal(Stagger.NODE.coords(2, 1.0, 1), [0.5, 1.5])


def test_fields_do_not_alias_each_other():
    g = grid(bc_y=Boundary.FREE_SURFACE)
    fields = {s: Field2D.zeros(g, s, Precision.FP16) for s in Stagger}
    for s, f in fields.items():
        assert f.values.dtype == np.float16
        assert f.values.shape == g.shape(s)
        f.values[0, 0] = 1.0
        assert sum(float(o.values[0, 0]) for o in fields.values()) == 1.0
        f.values[0, 0] = 0.0


# --- acoustic builder ------------------------------------------------------------


def test_homogeneous_acoustic_unit_medium():
    m = build_homogeneous_acoustic(600, 600, 1.0, 1.0)
    assert m.kind is MediumKind.ACOUSTIC
    for plane in m.planes.values():
        assert plane.shape == (600, 600)
        assert (plane == 1.0).all()
    m.validate()
    assert m.c_max() == 1.0


def test_homogeneous_acoustic_beta():
    m = build_homogeneous_acoustic(8, 8, 1.0, 2.0)
    assert (m.planes["beta"] == 0.25).all()
    assert m.c_max() == 2.0


def test_unit_medium_survives_fp16_exactly():
    m = build_homogeneous_acoustic(8, 8, 1.0, 1.0)
    for plane in m.planes.values():
        h = demote(Precision.FP16, plane).astype(np.float64)
        assert np.array_equal(h, plane)


def test_materialization_error_is_at_most_half_ulp():
    rng = np.random.default_rng(41)
    plane = np.exp2(rng.uniform(-10, 10, size=(20, 20)))
    h = demote(Precision.FP16, plane).astype(np.float64)
    ulp_half = np.exp2(np.floor(np.log2(plane)) - 11.0)
    assert (np.abs(h - plane) <= ulp_half).all()


def test_homogeneous_rejects_nonpositive():
    with pytest.raises(ValueError):
        build_homogeneous_acoustic(8, 8, 0.0, 1.0)
    with pytest.raises(ValueError):
        build_homogeneous_acoustic(8, 8, 1.0, -2.0)


# --- layered builder --------------------------------------------------------------


def test_single_layer_constants():
    m = build_layered_elastic(8, 8, [(1.0, 2.0, 3.0, 1.5)])
    # lam = 2 (9 - 2 * 2.25) = 9, mu = 2 * 2.25 = 4.5
    assert (m.planes["lam"] == 9.0).all()
    assert (m.planes["mu"] == 4.5).all()
    assert (m.planes["rho_x"] == 2.0).all()
    assert m.c_max() == math.sqrt((9.0 + 2 * 4.5) / 2.0)


def test_two_layers_switch_at_mid_depth():
    m = build_layered_elastic(8, 10, [(0.5, 1.0, 2.0, 1.0), (1.0, 4.0, 2.0, 1.0)])
    rho = m.planes["lam"] / (2.0 * 2.0 - 2.0 * 1.0)  # back out rho per row
    assert (m.planes["rho_x"][:5] == 1.0).all()
    assert (m.planes["rho_x"][5:] == 4.0).all()
    assert (rho[:5] == 1.0).all() and (rho[5:] == 4.0).all()
    # the half-offset rows switch at the same row index
    assert (m.planes["rho_y"][:5] == 1.0).all()
    assert (m.planes["rho_y"][5:] == 4.0).all()


def test_layer_moduli_at_preset_extremes():
    m = build_layered_elastic(8, 8, [(1.0, 2.0293, 4.6992, 1.0117)])
    mu = float(m.planes["mu"][0, 0])
    assert mu == 2.0293 * 1.0117 * 1.0117
    assert round(mu, 4) == 2.0771
    lam = float(m.planes["lam"][0, 0])
    assert lam == 2.0293 * (4.6992 * 4.6992 - 2.0 * 1.0117 * 1.0117)


def test_layered_rejects_bad_input():
    with pytest.raises(ValueError):
        build_layered_elastic(8, 8, [])
    with pytest.raises(ValueError):
        build_layered_elastic(8, 8, [(1.0, 1.0, 2.0, 2.0)])  # cs == cp
    with pytest.raises(ValueError):
        build_layered_elastic(8, 8, [(0.5, 1.0, 2.0, 1.0), (0.5, 1.0, 2.0, 1.0)])
    with pytest.raises(ValueError):
        build_layered_elastic(8, 8, [(0.5, 1.0, 2.0, 1.0)])  # does not reach bottom


def test_zero_shear_speed_is_allowed():
    m = build_layered_elastic(8, 8, [(1.0, 1.0, 2.0, 0.0)])
    assert (m.planes["mu"] == 0.0).all()
    m.validate()


# --- medium validation --------------------------------------------------------------


def test_validate_names_offending_cell():
    m = build_homogeneous_acoustic(8, 8, 1.0, 1.0)
    m.planes["rho_x"][2, 3] = 0.0
    with pytest.raises(ValueError) as err:
        m.validate()
    assert "rho_x[ix=3, iy=2]" in str(err.value)


def test_validate_rejects_nonfinite():
    m = build_layered_elastic(8, 8, [(1.0, 2.0, 3.0, 1.5)])
    m.planes["mu"][4, 4] = np.nan
    with pytest.raises(ValueError) as err:
        m.validate()
    assert "mu[ix=4, iy=4]" in str(err.value)


def test_validate_rejects_unstable_moduli():
    m = build_layered_elastic(8, 8, [(1.0, 2.0, 3.0, 1.5)])
    m.planes["lam"][...] = -10.0  # lam + 2 mu = -1
    with pytest.raises(ValueError) as err:
        m.validate()
    assert "lam + 2 mu" in str(err.value)


# --- file format -----------------------------------------------------------------------


def test_round_trip_acoustic(tmp_path):
    m = build_homogeneous_acoustic(9, 7, 1.25, 2.5)
    path = tmp_path / "m.wmed"
    save_medium(path, m)
    back = load_medium(path)
    assert back.kind is m.kind and (back.nx, back.ny) == (m.nx, m.ny)
    for name in m.planes:
        assert back.planes[name].tobytes() == m.planes[name].tobytes()


def test_round_trip_elastic(tmp_path):
    m = build_layered_elastic(10, 12, [(0.3, 2.0293, 1.8, 1.0117), (1.0, 2.623, 4.6992, 2.6)])
    path = tmp_path / "m.wmed"
    save_medium(path, m)
    back = load_medium(path)
    for name in m.planes:
        assert back.planes[name].tobytes() == m.planes[name].tobytes()


def test_truncated_file_rejected(tmp_path):
    m = build_homogeneous_acoustic(8, 8, 1.0, 1.0)
    path = tmp_path / "m.wmed"
    save_medium(path, m)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 16])
    with pytest.raises(ValueError) as err:
        load_medium(path)
    assert "size mismatch" in str(err.value)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "m.wmed"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError) as err:
        load_medium(path)
    assert "magic" in str(err.value)


def test_load_validates_entries(tmp_path):
    m = build_homogeneous_acoustic(8, 8, 1.0, 1.0)
    m.planes["beta"][1, 5] = 0.0
    path = tmp_path / "m.wmed"
    save_medium(path, m)
    with pytest.raises(ValueError) as err:
        load_medium(path)
    assert "beta[ix=5, iy=1]" in str(err.value)


# --- materialization helpers ---------------------------------------------------------


def test_extend_rows():
    g = grid(nx=8, ny=8, bc_y=Boundary.FREE_SURFACE)
    plane = np.arange(64, dtype=np.float64).reshape(8, 8)
    ext = extend_rows(plane, g, Stagger.CELL)
    assert ext.shape == (9, 8)
    assert np.array_equal(ext[-1], plane[-1])
    assert extend_rows(plane, g, Stagger.YFACE) is plane
    gp = grid(nx=8, ny=8)
    assert extend_rows(plane, gp, Stagger.CELL) is plane
