import numpy as np

from ksbcfd.fields import CellField
from ksbcfd.grid import build_random_perturbed, build_uniform, make_grid
from ksbcfd.io import DIAGNOSTIC_COLUMNS, diagnostics_to_csv, field_to_csv, field_to_vtk
from ksbcfd.problems import get_problem
from ksbcfd.scheme import SchemeConfig, run


def small_field():
    g = make_grid(build_uniform(0, 1, 3), build_random_perturbed(0, 1, 4, 0.2, 9))
    rng = np.random.default_rng(17)
    return CellField(g, rng.standard_normal(g.shape))


def test_field_csv_roundtrip(tmp_path):
    f = small_field()
    path = tmp_path / "f.csv"
    field_to_csv(f, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,x,y,value"
    assert len(lines) == 1 + 3 * 4
    for line in lines[1:]:
        i, j, x, y, v = line.split(",")
        i, j = int(i), int(j)
        assert float(x) == f.grid.x_axis.centers[i]
        assert float(y) == f.grid.y_axis.centers[j]
        assert float(v) == f.values[i, j]


def test_vtk_structure(tmp_path):
    f = small_field()
    path = tmp_path / "f.vtk"
    field_to_vtk(f, path, name="rho")
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET STRUCTURED_GRID"
    assert lines[4] == "DIMENSIONS 3 4 1"
    assert lines[5] == "POINTS 12 double"
    k = lines.index("LOOKUP_TABLE default")
    values = [float(s) for s in lines[k + 1:k + 13]]
    assert values[0] == f.values[0, 0]
    assert values[1] == f.values[1, 0]  # x varies fastest


def test_diagnostics_csv_shape(tmp_path):
    problem = get_problem("global_existence")
    g = make_grid(build_uniform(0, 1, 8), build_uniform(0, 1, 8))
    result = run(problem, g, SchemeConfig(lam=1.0, tau=0.005, t_final=0.02,
                                          uniqueness_monitor=False))
    path = tmp_path / "d.csv"
    diagnostics_to_csv(result.diagnostics, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(DIAGNOSTIC_COLUMNS)
    assert len(lines) == 1 + len(result.diagnostics)
    first = lines[1].split(",")
    assert float(first[0]) == result.diagnostics[0].t
    assert float(first[1]) == result.diagnostics[0].mass
