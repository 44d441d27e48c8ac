"""Output files: CSV series, JSON documents and legacy ASCII VTK."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .fem.projection import values_at_quadrature
from .fem.space import Field
from .mesh import Mesh

FLOAT_FMT = "%.17g"


def write_csv(path, columns, rows):
    """Write ``rows`` (sequences of floats) under a header of ``columns``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            if len(r) != len(columns):
                raise ValueError("row length does not match header")
            w.writerow([FLOAT_FMT % float(v) for v in r])
    return path


def write_records(path, records, columns=None):
    """CSV from a list of dicts; ``t`` always leads."""
    if columns is None:
        keys = list(records[0]) if records else ["t"]
        columns = ["t"] + [k for k in keys if k != "t"]
    return write_csv(path, columns, [[rec[c] for c in columns] for rec in records])


def read_csv(path):
    """Return ``{column: array}`` from a file written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_json(path, obj, text=None):
    path = Path(path)
    path.write_text((text if text is not None else json.dumps(obj, indent=2, sort_keys=True)) + "\n")
    return path


# -- VTK ---------------------------------------------------------------------


def _points3(mesh: Mesh):
    x = mesh.vertices
    if x.shape[1] == 2:
        x = np.column_stack([x, np.zeros(len(x))])
    return x


def _polydata(mesh: Mesh, title: str):
    x = _points3(mesh)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET POLYDATA"]
    lines.append(f"POINTS {len(x)} double")
    lines += [" ".join(FLOAT_FMT % v for v in p) for p in x]
    nc = mesh.num_cells
    lines.append(f"POLYGONS {nc} {4 * nc}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.cells]
    return lines


def write_mesh_vtk(path, mesh: Mesh):
    lines = _polydata(mesh, mesh.name)
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def cell_values(u: Field, eta: Field):
    """RT field at cell centroids (nc, 3) and cell-averaged elevation (nc,)."""
    V = u.space
    q0 = V.quad_data(0)
    uc = values_at_quadrature(u, q0)[:, 0, :]
    if uc.shape[1] == 2:
        uc = np.column_stack([uc, np.zeros(len(uc))])
    q = eta.space.quad
    vals = values_at_quadrature(eta)
    eta_avg = np.sum(vals * q.dx, axis=1) / np.sum(q.dx, axis=1)
    return uc, eta_avg


def write_frame_vtk(path, u: Field, eta: Field, t: float):
    mesh = u.space.mesh
    uc, ec = cell_values(u, eta)
    lines = _polydata(mesh, f"{mesh.name} t={FLOAT_FMT % t}")
    lines.append(f"CELL_DATA {mesh.num_cells}")
    lines += ["SCALARS eta double 1", "LOOKUP_TABLE default"]
    lines += [FLOAT_FMT % v for v in ec]
    lines.append("VECTORS u double")
    lines += [" ".join(FLOAT_FMT % v for v in row) for row in uc]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
