"""Dislocation-density analysis: discrete alpha fields, the closed-flux
(Bianchi) test, gauge transforms, the Eringen-Claus/Lazar coefficient
maps, the moment-stress contraction, symmetry checks of the Einstein
choice, and the incompatibility operator.

Sign conventions: the stored dislocation density is alpha = -Curl P
(equivalently +Curl e).  Operations written in terms of Curl P receive
the negated alpha at the call site and say so.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BoxMesh, TET_FACES
from .polynomials import PolyMat3
from .spaces import DiscreteField, MicroDistortionSpace, eval_curl_P, \
    gradient_inclusion
from .tensors import LEVI_CIVITA as EPS
from .tensors import IDENTITY, as_mat3, dev_sym, skew


@dataclass
class DislocationField:
    """Per-element constant dislocation density on a mesh."""

    mesh: BoxMesh
    values: np.ndarray  # (T, 3, 3)

    def magnitude(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0


def alpha_from_field(field: DiscreteField, sign: str = "from_P") -> DislocationField:
    """alpha = -Curl P for micro-distortions, +Curl e for gauge fields."""
    space = field.space
    if not isinstance(space, MicroDistortionSpace):
        raise ValueError("field must live in the micro-distortion space")
    if sign not in ("from_P", "from_e"):
        raise ValueError("sign must be 'from_P' or 'from_e'")
    s = -1.0 if sign == "from_P" else 1.0
    mesh = space.mesh
    vals = np.empty((mesh.num_tets, 3, 3))
    for t in range(mesh.num_tets):
        vals[t] = s * eval_curl_P(field, t)
    return DislocationField(mesh=mesh, values=vals)


# ---------------------------------------------------------------------------
# Bianchi identity: dislocations cannot end inside the body
# ---------------------------------------------------------------------------

def _region_flux(mesh: BoxMesh, tets, values) -> np.ndarray:
    """Row-wise flux of a per-element tensor through the region boundary."""
    inside = np.zeros(mesh.num_tets, dtype=bool)
    inside[list(tets)] = True
    flux = np.zeros(3)
    for t in np.nonzero(inside)[0]:
        verts = mesh.vertices[mesh.tets[t]]
        centroid = verts.mean(axis=0)
        for lf, tri in enumerate(TET_FACES):
            fid = mesh.tet_to_faces[t, lf]
            neighbors = mesh.face_to_tets[fid]
            if len(neighbors) == 2:
                other = neighbors[0] if neighbors[1] == t else neighbors[1]
                if inside[other]:
                    continue
            a, b, c = verts[list(tri)]
            n = 0.5 * np.cross(b - a, c - a)  # area-weighted normal
            if n @ (a - centroid) < 0:
                n = -n
            flux += values[t] @ n
    return flux


@dataclass
class BianchiReport:
    max_flux: float
    scale: float
    regions_checked: int
    worst_region: str

    @property
    def relative(self) -> float:
        return self.max_flux / self.scale if self.scale > 0 else self.max_flux


def bianchi_check(alpha: DislocationField, max_boxes: int = 64,
                  seed: int = 0) -> BianchiReport:
    """Closed-surface flux test of Div alpha = 0.

    Element values are constants, so the pointwise divergence vanishes
    identically; the discrete content of the identity is that the flux
    of every row through the boundary of any union of elements is zero.
    Checked on all interior vertex stars and on random axis-aligned
    sub-boxes of cells.
    """
    mesh = alpha.mesh
    scale = alpha.magnitude()
    worst = 0.0
    worst_region = "none"
    count = 0

    # interior vertex stars
    vertex_tets = {}
    for t, tet in enumerate(mesh.tets):
        for v in tet:
            vertex_tets.setdefault(int(v), []).append(t)
    for v, tets in vertex_tets.items():
        if mesh.boundary_vertex[v]:
            continue
        f = np.max(np.abs(_region_flux(mesh, tets, alpha.values)))
        count += 1
        if f > worst:
            worst, worst_region = f, f"vertex_star:{v}"

    # axis-aligned sub-boxes of grid cells (each cell holds 6 consecutive
    # tets); every single cell is covered so a local defect cannot hide
    nx, ny, nz = mesh.n
    rng = np.random.default_rng(seed)
    boxes = []
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                boxes.append(((ix, ix + 1), (iy, iy + 1), (iz, iz + 1)))
    for _ in range(max_boxes):
        i0, i1 = sorted(rng.integers(0, nx + 1, size=2))
        j0, j1 = sorted(rng.integers(0, ny + 1, size=2))
        k0, k1 = sorted(rng.integers(0, nz + 1, size=2))
        if i0 == i1 or j0 == j1 or k0 == k1:
            continue
        boxes.append(((i0, i1), (j0, j1), (k0, k1)))
    boxes.append(((0, nx), (0, ny), (0, nz)))  # the whole domain
    for (i0, i1), (j0, j1), (k0, k1) in boxes:
        tets = []
        for iz in range(k0, k1):
            for iy in range(j0, j1):
                for ix in range(i0, i1):
                    base = 6 * (ix + nx * (iy + ny * iz))
                    tets.extend(range(base, base + 6))
        f = np.max(np.abs(_region_flux(mesh, tets, alpha.values)))
        count += 1
        if f > worst:
            worst, worst_region = f, f"box:{(i0, i1, j0, j1, k0, k1)}"

    return BianchiReport(max_flux=worst, scale=max(scale, 1e-300),
                         regions_checked=count, worst_region=worst_region)


# ---------------------------------------------------------------------------
# discrete gauge transform
# ---------------------------------------------------------------------------

def gauge_transform(u: DiscreteField, P: DiscreteField, tau: DiscreteField):
    """(u, P) -> (u + tau, P + grad tau); e and alpha are unchanged."""
    if tau.space is not u.space:
        raise ValueError("tau must live in the displacement space of u")
    u_new = DiscreteField(u.space, u.coefficients + tau.coefficients)
    grad_tau = gradient_inclusion(tau, P.space)
    P_new = DiscreteField(P.space, P.coefficients + grad_tau.coefficients)
    return u_new, P_new


# ---------------------------------------------------------------------------
# Eringen-Claus/Teisseyre coefficients and the moment-stress tensor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TeisseyreCoeffs:
    t1: float
    t2: float
    t3: float


def lazar_from_teisseyre(t: TeisseyreCoeffs):
    """(a1, a2, a3) -> (alpha1, alpha2, alpha3)."""
    return (t.t2 - t.t3, t.t2 - t.t3 - 2 * t.t1, (2 * t.t3 + t.t2) / 3.0)


def teisseyre_from_lazar(alphas) -> TeisseyreCoeffs:
    a1, a2, a3 = alphas
    return TeisseyreCoeffs(t1=(a1 - a2) / 2.0, t2=2.0 * a1 / 3.0 + a3,
                           t3=a3 - a1 / 3.0)


def teisseyre_condition(t3: float) -> TeisseyreCoeffs:
    """The vanishing-rotation-moment sufficient condition a2 = -a3, a1 = -2a3."""
    return TeisseyreCoeffs(t1=-2 * t3, t2=-t3, t3=t3)


def lambda_tensor(alpha, t: TeisseyreCoeffs) -> np.ndarray:
    """Moment stress Lambda_plk built from the dislocation density.

    Component formula (the a2 term carries the sign that makes the
    epsilon contraction below reproduce the published m-form):
    Lambda_plk = a1 alpha_rn (eps_prn d_kl - eps_krn d_pl)
                 - a2 eps_pkn alpha_ln
                 + a3 (eps_pln alpha_kn - eps_kln alpha_pn).
    """
    a = as_mat3(alpha)
    a1, a2, a3 = t.t1, t.t2, t.t3
    lam = np.zeros((3, 3, 3))
    trace_vec = np.einsum("prn,rn->p", EPS, a)
    for p in range(3):
        for l in range(3):
            for k in range(3):
                v = a1 * (trace_vec[p] * IDENTITY[k, l] - trace_vec[k] * IDENTITY[p, l])
                v -= a2 * sum(EPS[p, k, n] * a[l, n] for n in range(3))
                v += a3 * sum(EPS[p, l, n] * a[k, n] - EPS[k, l, n] * a[p, n]
                              for n in range(3))
                lam[p, l, k] = v
    return lam


def moment_from_lambda(lam) -> np.ndarray:
    """m_kl = (1/2) eps_kmn Lambda_mln."""
    lam = np.asarray(lam, dtype=float)
    return 0.5 * np.einsum("kmn,mln->kl", EPS, lam)


def moment_curlp_form(curl_p, t: TeisseyreCoeffs) -> np.ndarray:
    """m = a3 tr(Curl P) I + 2 a1 skew Curl P + (a2 - a3) (Curl P)^T."""
    cp = as_mat3(curl_p)
    return (t.t3 * np.trace(cp) * IDENTITY + 2 * t.t1 * skew(cp)
            + (t.t2 - t.t3) * cp.T)


# ---------------------------------------------------------------------------
# Einstein-choice symmetry check and the incompatibility operator
# ---------------------------------------------------------------------------

def einstein_symmetry_check(alphas, P: PolyMat3, x) -> float:
    """Norm of the skew part of Curl(moment expression) at x.

    The moment expression is a1 dev sym Curl P + a2 skew Curl P
    + a3 tr(Curl P) I with exact polynomial curls.  It vanishes for all
    P when (a1, a2) = (-6 a3, 6 a3), and for symmetric P exactly when
    a1 = -a2.
    """
    a1, a2, a3 = alphas
    if P.degree() > 3:
        raise ValueError("polynomial degree above the supported maximum")
    cp = P.curl_rows()
    m = (cp.sym().dev().scale(a1) + cp.skew().scale(a2)
         + PolyMat3.identity_times(cp.trace() * a3))
    E = m.curl_rows()
    S = E(np.asarray(x, dtype=float))
    return float(np.linalg.norm(0.5 * (S - S.T)))


def inc_operator(field: PolyMat3, x) -> np.ndarray:
    """Incompatibility inc(F) = Curl((Curl F)^T) evaluated at x."""
    if field.degree() > 3:
        raise ValueError("polynomial degree above the supported maximum")
    inner = field.curl_rows().transpose()
    return inner.curl_rows()(np.asarray(x, dtype=float))


def einstein_background_stress(e_field: PolyMat3, a1: float,
                               p, x) -> np.ndarray:
    """sigma0 = sigma - a1 inc(sym e) of the Einstein-choice balance."""
    from .constitutive import sigma_iso

    ev = e_field(np.asarray(x, dtype=float))
    sigma = sigma_iso(ev, p)
    return sigma - a1 * inc_operator(e_field.sym(), x)
