"""Field and curve writers (CSV with 17 significant digits, legacy VTK)."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..constitutive import Regime
from .mesh import Mesh
from .solver import FieldSnapshot

__all__ = ["FIELD_COLUMNS", "write_field_csv", "write_vtk", "fmt"]

FIELD_COLUMNS = ["element", "gauss", "x", "y", "sxx", "syy", "sxy", "s1", "s2", "damage", "regime"]


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_field_csv(path: str | Path, snap: FieldSnapshot) -> None:
    pr = snap.principal
    names = {int(r): Regime(int(r)).name for r in np.unique(snap.regime)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_COLUMNS)
        for i in range(len(snap.element)):
            w.writerow(
                [
                    int(snap.element[i]),
                    int(snap.gauss[i]),
                    fmt(snap.xy[i, 0]),
                    fmt(snap.xy[i, 1]),
                    fmt(snap.sigma[i, 0]),
                    fmt(snap.sigma[i, 1]),
                    fmt(snap.sigma[i, 2]),
                    fmt(pr[i, 0]),
                    fmt(pr[i, 1]),
                    fmt(snap.damage[i]),
                    names[int(snap.regime[i])],
                ]
            )


def write_vtk(path: str | Path, mesh: Mesh, snap: FieldSnapshot) -> None:
    """Legacy ASCII unstructured grid; cell data are Gauss-point averages."""
    n_cells = len(mesh.elements)
    cell_type = {3: 5, 4: 9}
    sums = np.zeros((n_cells, 4))
    counts = np.zeros(n_cells)
    np.add.at(sums, snap.element, np.column_stack([snap.sigma, snap.damage]))
    np.add.at(counts, snap.element, 1.0)
    avg = sums / counts[:, None]
    u = snap.u.reshape(-1, 2)
    size = sum(len(c) + 1 for c in mesh.elements)
    lines = ["# vtk DataFile Version 3.0", f"step {snap.step}", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_nodes} double")
    lines += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {n_cells} {size}")
    lines += [" ".join(map(str, (len(c), *c))) for c in mesh.elements]
    lines.append(f"CELL_TYPES {n_cells}")
    lines += [str(cell_type[len(c)]) for c in mesh.elements]
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    lines.append("VECTORS displacement double")
    lines += [f"{fmt(a)} {fmt(b)} 0" for a, b in u]
    lines.append(f"CELL_DATA {n_cells}")
    for j, name in enumerate(["sxx", "syy", "sxy", "damage"]):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in avg[:, j]]
    Path(path).write_text("\n".join(lines) + "\n")
