import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidalfem.dynamics import initial_state
from tidalfem.io import cell_values, read_csv, write_csv, write_frame_vtk, write_mesh_vtk, write_records

from conftest import icosphere, rect, sphere_disc


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_roundtrip_bit_exact(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("csv") / "s.csv"
    t = np.arange(len(values), dtype=float)
    write_csv(p, ["t", "v"], np.column_stack([t, values]))
    back = read_csv(p)
    np.testing.assert_array_equal(back["v"], np.array(values))


def test_csv_header_and_digits(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["t", "x"], [[0.1, 1 / 3]])
    lines = p.read_text().splitlines()
    assert lines[0] == "t,x"
    assert lines[1] == "0.10000000000000001,0.33333333333333331"


def test_csv_row_length_check(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "a.csv", ["t", "x"], [[0.0]])


def test_records_put_t_first(tmp_path):
    p = write_records(tmp_path / "r.csv", [{"E": 1.0, "t": 0.0}])
    assert p.read_text().splitlines()[0] == "t,E"


def test_mesh_vtk_structure(tmp_path):
    m = rect(2, 1)
    text = write_mesh_vtk(tmp_path / "m.vtk", m).read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert "DATASET POLYDATA" in text
    assert f"POINTS {m.num_vertices} double" in text
    assert f"POLYGONS {m.num_cells} {4 * m.num_cells}" in text
    i = text.index(f"POINTS {m.num_vertices} double")
    assert text[i + 1].split() == ["0", "0", "0"]


def test_frame_vtk_cell_data(tmp_path):
    disc = sphere_disc(1)
    s = initial_state(disc, u=lambda x: np.cross(x, [0, 0, 1.0]), eta=lambda x: 1 + x[:, 2])
    text = write_frame_vtk(tmp_path / "f.vtk", s.u, s.eta, 0.25).read_text().splitlines()
    nc = disc.mesh.num_cells
    i = text.index(f"CELL_DATA {nc}")
    assert text[i + 1] == "SCALARS eta double 1"
    j = text.index("VECTORS u double")
    assert len(text) - j - 1 == nc
    assert len(text[j + 1].split()) == 3


def test_cell_values_of_smooth_fields():
    disc = sphere_disc(2)
    s = initial_state(disc, u=lambda x: np.cross(x, [0, 0, 1.0]), eta=lambda x: 2.0 + 0 * x[:, 0])
    uc, ec = cell_values(s.u, s.eta)
    np.testing.assert_allclose(ec, 2.0, atol=1e-13)
    # centroid velocity lies in each flat cell's plane
    n = disc.V.quad_data(0).geom.normal[:, 0]
    assert np.abs(np.einsum("cd,cd->c", uc, n)).max() <= 1e-13
