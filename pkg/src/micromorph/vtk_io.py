"""Legacy ASCII VTK export of meshes and fields (UNSTRUCTURED_GRID,
tetrahedra as cell type 10)."""
from __future__ import annotations

import numpy as np

from .mesh import BoxMesh


def write_vtk(path, mesh: BoxMesh, point_vectors=None, cell_tensors=None,
              cell_scalars=None, title="micromorph output") -> None:
    """Write the mesh with optional per-vertex vectors and per-cell
    tensors/scalars.

    point_vectors: dict name -> (V, 3); cell_tensors: dict name ->
    (T, 3, 3); cell_scalars: dict name -> (T,).
    """
    V = len(mesh.vertices)
    T = len(mesh.tets)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {V} double"]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.16g} {v[1]:.16g} {v[2]:.16g}")
    lines.append(f"CELLS {T} {5 * T}")
    for tet in mesh.tets:
        lines.append("4 " + " ".join(str(int(i)) for i in tet))
    lines.append(f"CELL_TYPES {T}")
    lines.extend(["10"] * T)

    if point_vectors:
        lines.append(f"POINT_DATA {V}")
        for name, data in point_vectors.items():
            data = np.asarray(data, dtype=float)
            if data.shape != (V, 3):
                raise ValueError(f"point vector field {name!r} has shape {data.shape}")
            lines.append(f"VECTORS {name} double")
            for row in data:
                lines.append(f"{row[0]:.16g} {row[1]:.16g} {row[2]:.16g}")

    if cell_tensors or cell_scalars:
        lines.append(f"CELL_DATA {T}")
        for name, data in (cell_tensors or {}).items():
            data = np.asarray(data, dtype=float)
            if data.shape != (T, 3, 3):
                raise ValueError(f"cell tensor field {name!r} has shape {data.shape}")
            lines.append(f"TENSORS {name} double")
            for m in data:
                for row in m:
                    lines.append(f"{row[0]:.16g} {row[1]:.16g} {row[2]:.16g}")
                lines.append("")
        for name, data in (cell_scalars or {}).items():
            data = np.asarray(data, dtype=float)
            if data.shape != (T,):
                raise ValueError(f"cell scalar field {name!r} has shape {data.shape}")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.16g}" for v in data)

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_header(path):
    """Minimal validation helper: returns (version line, dataset line)."""
    with open(path) as fh:
        first = fh.readline().strip()
        fh.readline()
        ascii_line = fh.readline().strip()
        dataset = fh.readline().strip()
    return first, ascii_line, dataset
