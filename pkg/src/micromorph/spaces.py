"""Finite element spaces: vector P1 in H^1_0 for the displacement and
row-wise lowest-order Whitney edge elements in H_0(Curl) for the
micro-distortion.

Edge degrees of freedom are tangential integrals along globally
oriented (low id -> high id) edges, so the gradient of a nodal field
maps exactly onto edge coefficients u(b) - u(a) and has zero discrete
curl: the discrete carrier of the gauge transformation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BoxMesh, TET_EDGES, locate_point

_GAUSS2 = (0.5 * (1.0 - 1.0 / np.sqrt(3.0)), 0.5 * (1.0 + 1.0 / np.sqrt(3.0)))


class ElementData:
    """Per-element affine geometry shared by evaluation and assembly."""

    def __init__(self, mesh: BoxMesh):
        self.mesh = mesh
        verts = mesh.vertices[mesh.tets]              # (T, 4, 3)
        M = verts[:, 1:, :] - verts[:, :1, :]          # rows v_j - v_0
        Minv = np.linalg.inv(M)
        grads = np.empty((len(mesh.tets), 4, 3))
        grads[:, 1:, :] = Minv.transpose(0, 2, 1)      # grad lambda_j, j=1..3
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        self.grads = grads
        self.volumes = np.abs(np.linalg.det(M)) / 6.0
        self.verts = verts

    def barycentric(self, t: int, x) -> np.ndarray:
        v = self.verts[t]
        lam = np.empty(4)
        lam[1:] = np.linalg.solve((v[1:] - v[0]).T, np.asarray(x) - v[0])
        lam[0] = 1.0 - lam[1:].sum()
        return lam


@dataclass
class DisplacementSpace:
    """Vector P1 space; DOFs live on interior vertices only."""

    mesh: BoxMesh
    elements: ElementData
    vertex_dof: np.ndarray   # (V,) position among free vertices, -1 if constrained
    n_dofs: int
    constrained: bool

    def dof(self, vertex: int, component: int) -> int:
        p = self.vertex_dof[vertex]
        return -1 if p < 0 else 3 * int(p) + component


@dataclass
class MicroDistortionSpace:
    """Row-wise Whitney edge space; DOFs live on interior edges only."""

    mesh: BoxMesh
    elements: ElementData
    edge_dof: np.ndarray     # (E,) position among free edges, -1 if constrained
    n_dofs: int
    constrained: bool

    def dof(self, edge: int, row: int) -> int:
        p = self.edge_dof[edge]
        return -1 if p < 0 else 3 * int(p) + row


@dataclass
class DiscreteField:
    space: object
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.n_dofs,):
            raise ValueError("coefficient vector does not match space dimension")

    def copy(self) -> "DiscreteField":
        return DiscreteField(self.space, self.coefficients.copy())


def build_spaces(mesh: BoxMesh, constrained: bool = True,
                 elements: ElementData | None = None):
    """Displacement and micro-distortion spaces on a common mesh.

    With constrained=False all vertices and edges carry DOFs; that
    variant exists for the boundary-condition negative controls.
    """
    elements = elements or ElementData(mesh)
    if constrained:
        free_v = np.nonzero(~mesh.boundary_vertex)[0]
        free_e = np.nonzero(~mesh.boundary_edge)[0]
    else:
        free_v = np.arange(len(mesh.vertices))
        free_e = np.arange(len(mesh.edges))
    vertex_dof = np.full(len(mesh.vertices), -1, dtype=np.int64)
    vertex_dof[free_v] = np.arange(len(free_v))
    edge_dof = np.full(len(mesh.edges), -1, dtype=np.int64)
    edge_dof[free_e] = np.arange(len(free_e))
    u_space = DisplacementSpace(mesh=mesh, elements=elements,
                                vertex_dof=vertex_dof, n_dofs=3 * len(free_v),
                                constrained=constrained)
    p_space = MicroDistortionSpace(mesh=mesh, elements=elements,
                                   edge_dof=edge_dof, n_dofs=3 * len(free_e),
                                   constrained=constrained)
    return u_space, p_space


# ---------------------------------------------------------------------------
# local basis helpers
# ---------------------------------------------------------------------------

def edge_local_vertices(mesh: BoxMesh, t: int):
    """For each local edge: (local a, local b) ordered by global id."""
    tet = mesh.tets[t]
    out = []
    for la, lb in TET_EDGES:
        if tet[la] < tet[lb]:
            out.append((la, lb))
        else:
            out.append((lb, la))
    return out


def whitney_values(space: MicroDistortionSpace, t: int, lam) -> np.ndarray:
    """Values of the six Whitney edge functions at barycentric lam: (6, 3)."""
    grads = space.elements.grads[t]
    lam = np.asarray(lam, dtype=float)
    out = np.empty((6, 3))
    for le, (la, lb) in enumerate(edge_local_vertices(space.mesh, t)):
        out[le] = lam[la] * grads[lb] - lam[lb] * grads[la]
    return out


def whitney_curls(space: MicroDistortionSpace, t: int) -> np.ndarray:
    """Element-constant curls of the six Whitney functions: (6, 3)."""
    grads = space.elements.grads[t]
    out = np.empty((6, 3))
    for le, (la, lb) in enumerate(edge_local_vertices(space.mesh, t)):
        out[le] = 2.0 * np.cross(grads[la], grads[lb])
    return out


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def interpolate_u(space: DisplacementSpace, g) -> DiscreteField:
    """Vertex interpolant of a callable point -> 3-vector."""
    coeff = np.zeros(space.n_dofs)
    for v in range(len(space.mesh.vertices)):
        p = space.vertex_dof[v]
        if p < 0:
            continue
        val = np.asarray(g(space.mesh.vertices[v]), dtype=float)
        coeff[3 * p:3 * p + 3] = val
    return DiscreteField(space, coeff)


def interpolate_P(space: MicroDistortionSpace, G) -> DiscreteField:
    """Edge-moment interpolant of a callable point -> Mat3.

    The DOF is the tangential integral of each row along the oriented
    edge, evaluated with 2-point Gauss quadrature (exact for the linear
    tangential traces of the edge space).
    """
    mesh = space.mesh
    coeff = np.zeros(space.n_dofs)
    for e in range(len(mesh.edges)):
        p = space.edge_dof[e]
        if p < 0:
            continue
        a, b = mesh.edges[e]
        xa, xb = mesh.vertices[a], mesh.vertices[b]
        tvec = xb - xa  # length-weighted tangent: ds * that = dt over [0,1]
        mom = np.zeros(3)
        for s in _GAUSS2:
            val = np.asarray(G(xa + s * (xb - xa)), dtype=float)
            mom += 0.5 * val @ tvec
        coeff[3 * p:3 * p + 3] = mom
    return DiscreteField(space, coeff)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_u(field: DiscreteField, t: int, lam) -> np.ndarray:
    space = field.space
    tet = space.mesh.tets[t]
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(3)
    for lv in range(4):
        p = space.vertex_dof[tet[lv]]
        if p >= 0:
            out += lam[lv] * field.coefficients[3 * p:3 * p + 3]
    return out


def eval_grad_u(field: DiscreteField, t: int) -> np.ndarray:
    """Element-constant gradient; rows are gradients of the components."""
    space = field.space
    tet = space.mesh.tets[t]
    grads = space.elements.grads[t]
    out = np.zeros((3, 3))
    for lv in range(4):
        p = space.vertex_dof[tet[lv]]
        if p >= 0:
            out += np.outer(field.coefficients[3 * p:3 * p + 3], grads[lv])
    return out


def eval_P(field: DiscreteField, t: int, lam) -> np.ndarray:
    space = field.space
    if not 0 <= t < space.mesh.num_tets:
        raise IndexError(f"element id {t} out of range")
    W = whitney_values(space, t, lam)
    out = np.zeros((3, 3))
    for le in range(6):
        p = space.edge_dof[space.mesh.tet_to_edges[t, le]]
        if p >= 0:
            out += np.outer(field.coefficients[3 * p:3 * p + 3], W[le])
    return out


def eval_curl_P(field: DiscreteField, t: int) -> np.ndarray:
    """Element-constant row-wise curl of the micro-distortion."""
    space = field.space
    if not 0 <= t < space.mesh.num_tets:
        raise IndexError(f"element id {t} out of range")
    C = whitney_curls(space, t)
    out = np.zeros((3, 3))
    for le in range(6):
        p = space.edge_dof[space.mesh.tet_to_edges[t, le]]
        if p >= 0:
            out += np.outer(field.coefficients[3 * p:3 * p + 3], C[le])
    return out


def eval_P_at_point(field: DiscreteField, x) -> np.ndarray:
    t = locate_point(field.space.mesh, x)
    lam = field.space.elements.barycentric(t, x)
    return eval_P(field, t, lam)


# ---------------------------------------------------------------------------
# exact sequence: nodal space -> edge space
# ---------------------------------------------------------------------------

def gradient_inclusion(u_field: DiscreteField,
                       p_space: MicroDistortionSpace) -> DiscreteField:
    """Exact image of a nodal field under the gradient map.

    Edge (a -> b) of row i receives u_i(b) - u_i(a); the result
    represents the row-wise gradient exactly and has zero curl on every
    element.
    """
    u_space = u_field.space
    mesh = p_space.mesh
    if u_space.mesh is not mesh:
        raise ValueError("fields must live on the same mesh")

    def nodal(v, i):
        p = u_space.vertex_dof[v]
        return 0.0 if p < 0 else u_field.coefficients[3 * p + i]

    coeff = np.zeros(p_space.n_dofs)
    for e in range(len(mesh.edges)):
        p = p_space.edge_dof[e]
        if p < 0:
            continue
        a, b = mesh.edges[e]
        for i in range(3):
            coeff[3 * p + i] = nodal(b, i) - nodal(a, i)
    return DiscreteField(p_space, coeff)


def gradient_inclusion_matrix(u_space: DisplacementSpace,
                              p_space: MicroDistortionSpace):
    """Sparse matrix of the gradient inclusion (edge dofs x nodal dofs)."""
    from scipy.sparse import coo_matrix

    mesh = p_space.mesh
    rows, cols, vals = [], [], []
    for e in range(len(mesh.edges)):
        p = p_space.edge_dof[e]
        if p < 0:
            continue
        a, b = mesh.edges[e]
        for v, s in ((b, 1.0), (a, -1.0)):
            q = u_space.vertex_dof[v]
            if q < 0:
                continue
            for i in range(3):
                rows.append(3 * p + i)
                cols.append(3 * q + i)
                vals.append(s)
    return coo_matrix((vals, (rows, cols)),
                      shape=(p_space.n_dofs, u_space.n_dofs)).tocsr()


# ---------------------------------------------------------------------------
# prolongation to a refined mesh (nestedness)
# ---------------------------------------------------------------------------

def prolong_u(field: DiscreteField, fine_space: DisplacementSpace) -> DiscreteField:
    coarse = field.space
    coeff = np.zeros(fine_space.n_dofs)
    for v in range(len(fine_space.mesh.vertices)):
        p = fine_space.vertex_dof[v]
        if p < 0:
            continue
        x = fine_space.mesh.vertices[v]
        t = locate_point(coarse.mesh, x)
        lam = coarse.elements.barycentric(t, x)
        coeff[3 * p:3 * p + 3] = eval_u(field, t, lam)
    return DiscreteField(fine_space, coeff)


def prolong_P(field: DiscreteField, fine_space: MicroDistortionSpace) -> DiscreteField:
    coarse = field.space

    def G(x):
        t = locate_point(coarse.mesh, x)
        return eval_P(field, t, coarse.elements.barycentric(t, x))

    return interpolate_P(fine_space, G)
