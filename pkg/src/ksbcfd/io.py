"""CSV and legacy-VTK serialization of fields and diagnostics.

Floats are written with repr-grade precision (%.17g) so reruns with
identical inputs produce byte-identical files and values round-trip exactly.
Cell indices in field CSVs are 0-based.
"""

from __future__ import annotations

from typing import Iterable

from .fields import CellField
from .scheme import StepDiagnostics

__all__ = [
    "field_to_csv",
    "field_to_vtk",
    "diagnostics_to_csv",
    "DIAGNOSTIC_COLUMNS",
]

DIAGNOSTIC_COLUMNS = (
    "t",
    "mass",
    "u_max",
    "u_min",
    "z_max",
    "argmax_i",
    "argmax_j",
    "iters_z",
    "iters_u",
    "dz_inf",
    "uniqueness_ok",
)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def field_to_csv(field: CellField, path) -> None:
    """Write one row per cell: i, j, x, y, value."""
    xs = field.grid.x_axis.centers
    ys = field.grid.y_axis.centers
    with open(path, "w", encoding="utf-8") as f:
        f.write("i,j,x,y,value\n")
        for j in range(field.grid.ny):
            for i in range(field.grid.nx):
                f.write(f"{i},{j},{_fmt(xs[i])},{_fmt(ys[j])},{_fmt(field.values[i, j])}\n")


def field_to_vtk(field: CellField, path, name: str = "value") -> None:
    """Legacy ASCII structured-grid VTK with cell centers as point data."""
    grid = field.grid
    xs = grid.x_axis.centers
    ys = grid.y_axis.centers
    nx, ny = grid.shape
    with open(path, "w", encoding="utf-8") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{name} on a staggered cell-centered grid\n")
        f.write("ASCII\n")
        f.write("DATASET STRUCTURED_GRID\n")
        f.write(f"DIMENSIONS {nx} {ny} 1\n")
        f.write(f"POINTS {nx * ny} double\n")
        for j in range(ny):
            for i in range(nx):
                f.write(f"{_fmt(xs[i])} {_fmt(ys[j])} 0\n")
        f.write(f"POINT_DATA {nx * ny}\n")
        f.write(f"SCALARS {name} double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for j in range(ny):
            for i in range(nx):
                f.write(f"{_fmt(field.values[i, j])}\n")


def diagnostics_row(d: StepDiagnostics) -> str:
    return ",".join(
        [
            _fmt(d.t),
            _fmt(d.mass),
            _fmt(d.u_max),
            _fmt(d.u_min),
            _fmt(d.z_max),
            str(d.argmax_u[0]),
            str(d.argmax_u[1]),
            str(d.solver_iters_z),
            str(d.solver_iters_u),
            _fmt(d.dz_inf),
            str(int(d.uniqueness_ok)),
        ]
    )


def diagnostics_to_csv(diagnostics: Iterable[StepDiagnostics], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
        for d in diagnostics:
            f.write(diagnostics_row(d) + "\n")
