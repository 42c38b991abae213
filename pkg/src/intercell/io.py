"""File output: legacy-VTK unstructured grids and CSV tables.

CSV floats are written with ``repr`` so a write/parse round trip is exact
(bitwise) for finite doubles.
"""

from __future__ import annotations

import csv

import numpy as np

from .mesh import HexMesh

VTK_HEXAHEDRON = 12


class IOError_(RuntimeError):
    pass


def export_vtk(path, mesh: HexMesh, point_fields: dict) -> None:
    """Legacy ASCII VTK unstructured grid with nodal scalar fields.

    ``point_fields`` maps field names (e.g. ``"il2_nM"``) to arrays of one
    value per mesh vertex.
    """
    for name, values in point_fields.items():
        if np.asarray(values).shape != (mesh.n_vertices,):
            raise IOError_(f"field {name!r} must have one value per vertex")
    ne = mesh.n_elements
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("intercell output\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for p in mesh.vertices:
            fh.write(f"{p[0]:.10g} {p[1]:.10g} {p[2]:.10g}\n")
        fh.write(f"CELLS {ne} {9 * ne}\n")
        for conn in mesh.elements:
            fh.write("8 " + " ".join(str(v) for v in conn) + "\n")
        fh.write(f"CELL_TYPES {ne}\n")
        fh.write("\n".join([str(VTK_HEXAHEDRON)] * ne) + "\n")
        fh.write(f"POINT_DATA {mesh.n_vertices}\n")
        for name, values in point_fields.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(repr(float(v)) for v in values) + "\n")


def write_csv(path, header: list, rows) -> None:
    """CSV with full-precision floats (repr) and verbatim strings."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def read_csv(path) -> tuple[list, list]:
    """Inverse of write_csv; numeric-looking entries become floats."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for raw in r:
            row = []
            for x in raw:
                try:
                    row.append(float(x))
                except ValueError:
                    row.append(x)
            rows.append(row)
    return header, rows


def export_state_csv(path, u: np.ndarray, v: np.ndarray) -> None:
    """Flat dump of a system state: PDE values then per-cell ODE triples."""
    rows = [["pde", i, float(x)] for i, x in enumerate(u)]
    names = ("R", "C", "E")
    for i, triple in enumerate(np.asarray(v).reshape(-1, 3)):
        rows.extend([[names[c], i, float(triple[c])] for c in range(3)])
    write_csv(path, ["component", "index", "value"], rows)


def read_state_csv(path) -> tuple[np.ndarray, np.ndarray]:
    _, rows = read_csv(path)
    u = [r[2] for r in rows if r[0] == "pde"]
    per = {"R": [], "C": [], "E": []}
    for r in rows:
        if r[0] in per:
            per[r[0]].append(r[2])
    v = np.stack([per["R"], per["C"], per["E"]], axis=1).ravel()
    return np.asarray(u), v
