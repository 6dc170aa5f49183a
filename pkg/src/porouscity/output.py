"""Snapshot and diagnostics writers (CSV, VTK legacy ASCII).

Floats are serialized with 17 significant digits so a re-parsed snapshot
reproduces the in-memory state exactly.
"""

from __future__ import annotations

import os

import numpy as np

from .diagnostics import BudgetRow
from .mesh import Mesh

SNAPSHOT_HEADER = "id,x,y,rho,u1,u2,phi,vdes"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def snapshot_name(step: int, ext: str) -> str:
    return f"snap_{step:06d}.{ext}"


def write_snapshot_csv(path, mesh: Mesh, rho, u, phi, vdes_norm) -> str:
    lines = [SNAPSHOT_HEADER]
    for i in range(mesh.n_nodes):
        lines.append(
            f"{i},{_fmt(mesh.nodes[i, 0])},{_fmt(mesh.nodes[i, 1])},"
            f"{_fmt(rho[i])},{_fmt(u[i, 0])},{_fmt(u[i, 1])},"
            f"{_fmt(phi[i])},{_fmt(vdes_norm[i])}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


def read_snapshot_csv(path):
    """Re-parse a snapshot CSV into a dict of column arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def write_snapshot_vtk(path, mesh: Mesh, rho, u, phi) -> str:
    """VTK legacy ASCII 2.0 unstructured grid with point data rho, u, phi."""
    n_v, n_t = mesh.n_nodes, mesh.n_triangles
    out = [
        "# vtk DataFile Version 2.0",
        "porouscity snapshot",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n_v} double",
    ]
    out += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.nodes]
    out.append(f"CELLS {n_t} {4 * n_t}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {n_t}")
    out += ["5"] * n_t
    out.append(f"POINT_DATA {n_v}")
    out.append("SCALARS rho double 1")
    out.append("LOOKUP_TABLE default")
    out += [_fmt(v) for v in rho]
    out.append("VECTORS u double")
    out += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in u]
    out.append("SCALARS phi double 1")
    out.append("LOOKUP_TABLE default")
    out += [_fmt(v) for v in phi]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return str(path)


def write_snapshot(outdir, step, mesh: Mesh, rho, u, phi, vdes_norm,
                   fmt="csv") -> list[str]:
    """Write one snapshot in the requested format(s); returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    if fmt in ("csv", "both"):
        paths.append(write_snapshot_csv(
            os.path.join(outdir, snapshot_name(step, "csv")),
            mesh, rho, u, phi, vdes_norm,
        ))
    if fmt in ("vtk", "both"):
        paths.append(write_snapshot_vtk(
            os.path.join(outdir, snapshot_name(step, "vtk")), mesh, rho, u, phi,
        ))
    return paths


class DiagnosticsWriter:
    """Streams one BudgetRow per step to diagnostics.csv."""

    def __init__(self, outdir):
        os.makedirs(outdir, exist_ok=True)
        self.path = os.path.join(outdir, "diagnostics.csv")
        self._fh = open(self.path, "w", encoding="utf-8")
        self._fh.write(BudgetRow.HEADER + "\n")

    def write(self, row: BudgetRow):
        self._fh.write(row.csv() + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
