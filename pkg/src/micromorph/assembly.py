"""Galerkin assembly of the relaxed, further-relaxed and gauge bilinear
forms into sparse symmetric systems.

All integrands are piecewise polynomials of degree at most two, so the
4-point tet rule makes assembly exact up to roundoff.  Element loops
run over contiguous chunks that may be processed by worker threads;
chunk results are merged in a fixed order, so assembled matrices are
bitwise independent of the thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .constitutive import AnisoTensors
from .mesh import TET_EDGES
from .quadrature import tet_rule
from .spaces import (DisplacementSpace, MicroDistortionSpace,
                     edge_local_vertices)
from .tensors import IDENTITY

# 9x9 projector matrices acting on row-major flattened Mat3
def _proj(fn):
    M = np.zeros((9, 9))
    for k in range(3):
        for l in range(3):
            E = np.zeros((3, 3))
            E[k, l] = 1.0
            M[:, 3 * k + l] = fn(E).ravel()
    return M


P_ID = np.eye(9)
P_SYM = _proj(lambda X: 0.5 * (X + X.T))
P_SKEW = _proj(lambda X: 0.5 * (X - X.T))
P_DEV = _proj(lambda X: X - np.trace(X) / 3.0 * IDENTITY)
P_DEVSYM = P_DEV @ P_SYM
# weight whose quadratic form is (tr X)^2
P_SPH_WEIGHT = np.outer(IDENTITY.ravel(), IDENTITY.ravel())


@dataclass
class SystemMatrix:
    """Sparse symmetric Galerkin matrix over (u, P) or a single e field."""

    matrix: csr_matrix
    n_dofs_u: int
    n_dofs_p: int
    assembled: bool = True

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def as_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def symmetry_error(self) -> float:
        d = self.matrix - self.matrix.T
        scale = np.max(np.abs(self.matrix.data)) if self.matrix.nnz else 0.0
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(d.data)) / scale if d.nnz else 0.0)


class FormTerm:
    """One integrand <W.(A field_a), (B field_b)> of a quadratic form.

    field names: 'grad_u', 'P', 'curl_P', 'e' (= grad_u - P).
    The weight W is a 9x9 matrix; A, B are 9x9 projectors.
    """

    def __init__(self, field_a, weight, field_b, proj_a=None, proj_b=None):
        self.field_a = field_a
        self.field_b = field_b
        w = np.asarray(weight, dtype=float)
        self.left = w if proj_a is None else w @ np.asarray(proj_a)
        self.projb = None if proj_b is None else np.asarray(proj_b)

    def weight_between(self):
        # contribution M[b_dof, a_dof] = rows_b @ (projb^T W_left) @ rows_a^T
        if self.projb is None:
            return self.left
        return self.projb.T @ self.left


_QPOINTS, _QWEIGHTS = tet_rule(2)


def _edge_orientation(mesh, tids):
    """Local (a, b) vertex indices per edge, ordered by global id: (t, 6, 2)."""
    tets = mesh.tets[tids]
    la = np.empty((len(tids), 6), dtype=np.int64)
    lb = np.empty((len(tids), 6), dtype=np.int64)
    for le, (a, b) in enumerate(TET_EDGES):
        swap = tets[:, a] > tets[:, b]
        la[:, le] = np.where(swap, b, a)
        lb[:, le] = np.where(swap, a, b)
    return la, lb


def _batched_rows(u_space, p_space, tids, lam):
    """Flattened Mat3 slot values per local dof for a chunk of elements.

    Returns dict of (nt, ndof_local, 9) arrays plus the (nt, ndof_local)
    global dof indices (-1 marks a constrained dof).
    """
    space = p_space or u_space
    mesh = space.mesh
    grads = space.elements.grads[tids]      # (nt, 4, 3)
    tets = mesh.tets[tids]
    nt = len(tids)

    n_u_local = 12 if u_space is not None else 0
    n_p_local = 18 if p_space is not None else 0
    ntotal = n_u_local + n_p_local
    gdofs = np.full((nt, ntotal), -1, dtype=np.int64)
    rows = {}

    if u_space is not None:
        gu = np.zeros((nt, 12, 9))
        vdof = u_space.vertex_dof[tets]      # (nt, 4)
        for lv in range(4):
            for i in range(3):
                gu[:, 3 * lv + i, 3 * i:3 * i + 3] = grads[:, lv, :]
                gdofs[:, 3 * lv + i] = np.where(vdof[:, lv] >= 0,
                                                3 * vdof[:, lv] + i, -1)
        full = np.zeros((nt, ntotal, 9))
        full[:, :12] = gu
        rows["grad_u"] = full

    if p_space is not None:
        la, lb = _edge_orientation(mesh, tids)
        ga = np.take_along_axis(grads, la[:, :, None], axis=1)  # (nt, 6, 3)
        gb = np.take_along_axis(grads, lb[:, :, None], axis=1)
        lamv = np.asarray(lam)
        lam_a = lamv[la]
        lam_b = lamv[lb]
        Wv = lam_a[:, :, None] * gb - lam_b[:, :, None] * ga    # (nt, 6, 3)
        Cv = 2.0 * np.cross(ga, gb)
        offset = u_space.n_dofs if u_space is not None else 0
        edof = p_space.edge_dof[mesh.tet_to_edges[tids]]        # (nt, 6)
        pv = np.zeros((nt, 18, 9))
        pc = np.zeros((nt, 18, 9))
        for le in range(6):
            for i in range(3):
                pv[:, 3 * le + i, 3 * i:3 * i + 3] = Wv[:, le, :]
                pc[:, 3 * le + i, 3 * i:3 * i + 3] = Cv[:, le, :]
                gdofs[:, n_u_local + 3 * le + i] = np.where(
                    edof[:, le] >= 0, offset + 3 * edof[:, le] + i, -1)
        fullv = np.zeros((nt, ntotal, 9))
        fullc = np.zeros((nt, ntotal, 9))
        fullv[:, n_u_local:] = pv
        fullc[:, n_u_local:] = pc
        rows["P"] = fullv
        rows["curl_P"] = fullc

    if "grad_u" in rows and "P" in rows:
        rows["e"] = rows["grad_u"] - rows["P"]
    elif "P" in rows and u_space is None:
        rows["e"] = rows["P"]  # single-field gauge problem: the unknown is e
    return rows, gdofs


def _assemble_terms(u_space, p_space, terms, threads=1):
    mesh = (p_space or u_space).mesh
    elements = (p_space or u_space).elements
    n_u = u_space.n_dofs if u_space is not None else 0
    n_p = p_space.n_dofs if p_space is not None else 0
    dim = n_u + n_p
    T = mesh.num_tets

    weights = [(term, term.weight_between()) for term in terms]

    def process(chunk):
        if len(chunk) == 0:
            return (np.empty(0, dtype=np.int64),) * 2 + (np.empty(0),)
        vols = elements.volumes[chunk]
        local = None
        gdofs = None
        for iq in range(len(_QWEIGHTS)):
            rows, gdofs = _batched_rows(u_space, p_space, chunk, _QPOINTS[iq])
            for term, W in weights:
                A = rows[term.field_a]
                B = rows[term.field_b]
                contrib = np.einsum("tbj,ji,tai->tba", B, W, A, optimize=True)
                contrib *= (_QWEIGHTS[iq] * vols)[:, None, None]
                local = contrib if local is None else local + contrib
        nloc = gdofs.shape[1]
        rr = np.repeat(gdofs, nloc, axis=1).ravel()
        cc = np.tile(gdofs, (1, nloc)).ravel()
        vv = local.reshape(-1)
        keep = (rr >= 0) & (cc >= 0)
        return rr[keep], cc[keep], vv[keep]

    chunks = np.array_split(np.arange(T), max(1, min(threads * 4, T)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(process, chunks))
    else:
        results = [process(c) for c in chunks]
    rows = np.concatenate([r[0] for r in results])
    cols = np.concatenate([r[1] for r in results])
    vals = np.concatenate([r[2] for r in results])
    mat = coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    return SystemMatrix(matrix=mat, n_dofs_u=n_u, n_dofs_p=n_p)


# ---------------------------------------------------------------------------
# the three model forms
# ---------------------------------------------------------------------------

def _t9(T):
    return np.asarray(T, dtype=float).reshape(9, 9)


def assemble_relaxed(spaces, T: AnisoTensors, threads: int = 1) -> SystemMatrix:
    """<C.(grad u - P), (grad u~ - P~)> + <H.sym P, sym P~> + <Lc.Curl P, Curl P~>.

    With a minor-symmetric C this is exactly the relaxed form acting on
    the symmetric parts; a C carrying a skew response realizes the
    Cosserat extension with mu_c >= 0.
    """
    u_space, p_space = spaces
    terms = [
        FormTerm("e", _t9(T.C), "e"),
        FormTerm("P", _t9(T.H) @ P_SYM, "P", proj_b=P_SYM),
        FormTerm("curl_P", _t9(T.Lc), "curl_P"),
    ]
    return _assemble_terms(u_space, p_space, terms, threads)


def assemble_further_relaxed(spaces, T: AnisoTensors, threads: int = 1) -> SystemMatrix:
    """Variant with dev projections in the H and Lc slots."""
    u_space, p_space = spaces
    terms = [
        FormTerm("e", _t9(T.C), "e"),
        FormTerm("P", _t9(T.H) @ P_DEVSYM, "P", proj_b=P_DEVSYM),
        FormTerm("curl_P", _t9(T.Lc) @ P_DEV, "curl_P", proj_b=P_DEV),
    ]
    return _assemble_terms(u_space, p_space, terms, threads)


def assemble_gauge(e_space: MicroDistortionSpace, T: AnisoTensors,
                   threads: int = 1) -> SystemMatrix:
    """<C.e, e~> + <B.Curl e, e~> + <B.Curl e~, e> + <Lc.Curl e, Curl e~>.

    The two B cross-terms symmetrize the form as written.
    """
    B9 = _t9(T.B)
    terms = [
        FormTerm("e", _t9(T.C), "e"),
        FormTerm("curl_P", B9, "e"),        # <B.Curl e_trial, e_test>
        FormTerm("e", B9.T, "curl_P"),      # <B.Curl e_test, e_trial>
        FormTerm("curl_P", _t9(T.Lc), "curl_P"),
    ]
    return _assemble_terms(None, e_space, terms, threads)


def assemble_quadratic_form(u_space, p_space, terms, threads: int = 1) -> SystemMatrix:
    """General symmetric form assembler used by the coercivity lab."""
    return _assemble_terms(u_space, p_space, terms, threads)


# ---------------------------------------------------------------------------
# load functionals
# ---------------------------------------------------------------------------

def assemble_load(spaces, f=None, M=None, threads: int = 1) -> np.ndarray:
    """Moments of body force f (3-vector) and body moment M (Mat3)."""
    u_space, p_space = spaces
    mesh = p_space.mesh
    elements = p_space.elements
    out = np.zeros(u_space.n_dofs + p_space.n_dofs)
    qp, qw = _QPOINTS, _QWEIGHTS
    for t in range(mesh.num_tets):
        vol = elements.volumes[t]
        verts = elements.verts[t]
        tet = mesh.tets[t]
        locs = edge_local_vertices(mesh, t)
        grads = elements.grads[t]
        for iq in range(len(qw)):
            lam = qp[iq]
            x = lam @ verts
            w = qw[iq] * vol
            if f is not None:
                fval = np.asarray(f(x), dtype=float)
                for lv in range(4):
                    p = u_space.vertex_dof[tet[lv]]
                    if p >= 0:
                        out[3 * p:3 * p + 3] += w * lam[lv] * fval
            if M is not None:
                mval = np.asarray(M(x), dtype=float)
                for le, (la, lb) in enumerate(locs):
                    p = p_space.edge_dof[mesh.tet_to_edges[t, le]]
                    if p >= 0:
                        wv = lam[la] * grads[lb] - lam[lb] * grads[la]
                        base = u_space.n_dofs + 3 * p
                        out[base:base + 3] += w * (mval @ wv)
    return out


def assemble_gauge_load(e_space: MicroDistortionSpace, sigma0) -> np.ndarray:
    """Moments of the background stress against the edge test fields."""
    mesh = e_space.mesh
    elements = e_space.elements
    out = np.zeros(e_space.n_dofs)
    qp, qw = _QPOINTS, _QWEIGHTS
    for t in range(mesh.num_tets):
        vol = elements.volumes[t]
        verts = elements.verts[t]
        locs = edge_local_vertices(mesh, t)
        grads = elements.grads[t]
        for iq in range(len(qw)):
            lam = qp[iq]
            x = lam @ verts
            w = qw[iq] * vol
            sval = np.asarray(sigma0(x), dtype=float)
            for le, (la, lb) in enumerate(locs):
                p = e_space.edge_dof[mesh.tet_to_edges[t, le]]
                if p >= 0:
                    wv = lam[la] * grads[lb] - lam[lb] * grads[la]
                    out[3 * p:3 * p + 3] += w * (sval @ wv)
    return out


def dump_matrix_market(path, system: SystemMatrix, comment: str = "") -> None:
    from scipy.io import mmwrite

    mmwrite(path, system.matrix.tocoo(), comment=comment, symmetry="general")
