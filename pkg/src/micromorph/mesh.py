"""Structured tetrahedral meshes of axis-aligned boxes.

Every grid cell is split into the same six tetrahedra around the main
diagonal (Kuhn subdivision), so uniform refinement produces nested
conforming meshes: build_box_mesh(2n) refines build_box_mesh(n).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# The six Kuhn tetrahedra of the unit cell: vertex paths from the cell
# corner to the opposite corner, one axis step per permutation entry.
_KUHN_PERMS = list(itertools.permutations((0, 1, 2)))

# Local edges of a tet in the (vertex, vertex) convention used everywhere.
TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TET_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


@dataclass
class BoxMesh:
    vertices: np.ndarray          # (V, 3)
    tets: np.ndarray              # (T, 4) positive orientation
    edges: np.ndarray             # (E, 2) sorted vertex pairs
    faces: np.ndarray             # (F, 3) sorted vertex triples
    tet_to_edges: np.ndarray      # (T, 6) edge ids, local order TET_EDGES
    tet_to_faces: np.ndarray      # (T, 4) face ids, local order TET_FACES
    boundary_vertex: np.ndarray   # (V,) bool
    boundary_edge: np.ndarray     # (E,) bool
    boundary_face: np.ndarray     # (F,) bool
    n: tuple                      # grid resolution per axis
    bounds: tuple                 # (lo, hi) box corners
    face_to_tets: dict = field(repr=False, default=None)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    def tet_vertices(self, t: int) -> np.ndarray:
        return self.vertices[self.tets[t]]

    def tet_volume(self, t: int) -> float:
        v = self.tet_vertices(t)
        return float(np.linalg.det(v[1:] - v[0]) / 6.0)

    def volumes(self) -> np.ndarray:
        v = self.vertices[self.tets]
        return np.linalg.det(v[:, 1:] - v[:, :1]) / 6.0


def entity_counts(m: BoxMesh):
    return (len(m.vertices), len(m.edges), len(m.faces), len(m.tets))


def mesh_size(m: BoxMesh) -> float:
    """Longest edge length."""
    d = m.vertices[m.edges[:, 0]] - m.vertices[m.edges[:, 1]]
    return float(np.max(np.linalg.norm(d, axis=1)))


def build_box_mesh(n, bounds=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))) -> BoxMesh:
    """Kuhn-subdivided box mesh with n = (nx, ny, nz) cells per axis."""
    if np.isscalar(n):
        n = (int(n),) * 3
    nx, ny, nz = (int(v) for v in n)
    if min(nx, ny, nz) < 1:
        raise ValueError("cell counts must be >= 1")
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if not np.all(hi > lo):
        raise ValueError("degenerate bounds: hi must exceed lo componentwise")

    dims = np.array([nx + 1, ny + 1, nz + 1])

    def vid(ix, iy, iz):
        return ix + dims[0] * (iy + dims[1] * iz)

    grid = np.stack(np.meshgrid(
        np.linspace(lo[0], hi[0], dims[0]),
        np.linspace(lo[1], hi[1], dims[1]),
        np.linspace(lo[2], hi[2], dims[2]), indexing="ij"), axis=-1)
    vertices = grid.transpose(2, 1, 0, 3).reshape(-1, 3)

    tets = []
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                corner = np.array([ix, iy, iz])
                for perm in _KUHN_PERMS:
                    path = [corner.copy()]
                    for axis in perm:
                        nxt = path[-1].copy()
                        nxt[axis] += 1
                        path.append(nxt)
                    ids = [vid(*p) for p in path]
                    v = vertices[ids]
                    if np.linalg.det(v[1:] - v[0]) < 0:
                        ids[1], ids[2] = ids[2], ids[1]
                    tets.append(ids)
    tets = np.asarray(tets, dtype=np.int64)

    # deduplicated edge and face tables
    edge_index: dict = {}
    tet_to_edges = np.empty((len(tets), 6), dtype=np.int64)
    for t, tet in enumerate(tets):
        for le, (a, b) in enumerate(TET_EDGES):
            key = (min(tet[a], tet[b]), max(tet[a], tet[b]))
            tet_to_edges[t, le] = edge_index.setdefault(key, len(edge_index))
    edges = np.asarray(sorted(edge_index, key=edge_index.get), dtype=np.int64)

    face_index: dict = {}
    tet_to_faces = np.empty((len(tets), 4), dtype=np.int64)
    face_to_tets: dict = {}
    for t, tet in enumerate(tets):
        for lf, tri in enumerate(TET_FACES):
            key = tuple(sorted(tet[list(tri)]))
            fid = face_index.setdefault(key, len(face_index))
            tet_to_faces[t, lf] = fid
            face_to_tets.setdefault(fid, []).append(t)
    faces = np.asarray(sorted(face_index, key=face_index.get), dtype=np.int64)

    boundary_face = np.array([len(face_to_tets[f]) == 1 for f in range(len(faces))])
    boundary_vertex = np.zeros(len(vertices), dtype=bool)
    boundary_edge = np.zeros(len(edges), dtype=bool)
    edge_lookup = edge_index
    for f in np.nonzero(boundary_face)[0]:
        tri = faces[f]
        boundary_vertex[tri] = True
        for a, b in ((0, 1), (0, 2), (1, 2)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            boundary_edge[edge_lookup[key]] = True

    return BoxMesh(vertices=vertices, tets=tets, edges=edges, faces=faces,
                   tet_to_edges=tet_to_edges, tet_to_faces=tet_to_faces,
                   boundary_vertex=boundary_vertex, boundary_edge=boundary_edge,
                   boundary_face=boundary_face, n=(nx, ny, nz),
                   bounds=(tuple(lo), tuple(hi)),
                   face_to_tets=face_to_tets)


def refine(m: BoxMesh):
    """Uniformly refined mesh plus the coarse-to-fine vertex id map."""
    fine = build_box_mesh(tuple(2 * v for v in m.n), m.bounds)
    # structured grids: coarse vertex (ix,iy,iz) sits at fine (2ix,2iy,2iz)
    nx, ny, nz = m.n
    cdims = (nx + 1, ny + 1, nz + 1)
    fdims = (2 * nx + 1, 2 * ny + 1, 2 * nz + 1)
    vmap = np.empty(len(m.vertices), dtype=np.int64)
    for iz in range(cdims[2]):
        for iy in range(cdims[1]):
            for ix in range(cdims[0]):
                c = ix + cdims[0] * (iy + cdims[1] * iz)
                f = 2 * ix + fdims[0] * (2 * iy + fdims[1] * 2 * iz)
                vmap[c] = f
    return fine, vmap


def locate_point(m: BoxMesh, x, tol: float = 1e-10) -> int:
    """Element id containing x (structured lookup plus barycentric test)."""
    lo = np.asarray(m.bounds[0])
    hi = np.asarray(m.bounds[1])
    nvec = np.asarray(m.n)
    x = np.asarray(x, dtype=float)
    cell = np.floor((x - lo) / (hi - lo) * nvec).astype(int)
    cell = np.clip(cell, 0, nvec - 1)
    # candidate cells around the located one guard against points on facets
    for dz in (0, -1, 1):
        for dy in (0, -1, 1):
            for dx in (0, -1, 1):
                c = cell + np.array([dx, dy, dz])
                if np.any(c < 0) or np.any(c >= nvec):
                    continue
                base = 6 * (c[0] + nvec[0] * (c[1] + nvec[1] * c[2]))
                for t in range(base, base + 6):
                    lam = barycentric(m, t, x)
                    if np.all(lam >= -tol):
                        return t
    raise ValueError(f"point {x} not located in mesh")


def barycentric(m: BoxMesh, t: int, x) -> np.ndarray:
    v = m.tet_vertices(t)
    A = np.vstack([v.T, np.ones(4)])
    b = np.append(np.asarray(x, dtype=float), 1.0)
    return np.linalg.solve(A, b)


def boundary_area(m: BoxMesh) -> float:
    area = 0.0
    for f in np.nonzero(m.boundary_face)[0]:
        a, b, c = m.vertices[m.faces[f]]
        area += 0.5 * np.linalg.norm(np.cross(b - a, c - a))
    return area
