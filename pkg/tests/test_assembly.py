import io

import numpy as np
import pytest

from micromorph.assembly import (FormTerm, P_ID, P_SPH_WEIGHT, assemble_gauge,
                                 assemble_gauge_load, assemble_further_relaxed,
                                 assemble_load, assemble_quadratic_form,
                                 assemble_relaxed, dump_matrix_market)
from micromorph.constitutive import IsotropicParams, iso_to_tensors
from micromorph.mesh import build_box_mesh
from micromorph.quadrature import physical_points, tet_rule
from micromorph.spaces import (DiscreteField, build_spaces, eval_curl_P,
                               eval_grad_u, eval_P, gradient_inclusion_matrix,
                               interpolate_P, interpolate_u)
from micromorph.solver import solve


def params(**kw):
    base = dict(mu_e=2.0, lambda_e=1.0, mu_c=0.0, mu_h=1.5, lambda_h=0.5,
                a1=1.0, a2=2.0, a3=3.0)
    base.update(kw)
    return IsotropicParams(**base)


def test_single_cell_system_is_spd():
    spaces = build_spaces(build_box_mesh((1, 1, 1)))
    A = assemble_relaxed(spaces, iso_to_tensors(params()))
    assert A.dimension == 3
    ev = np.linalg.eigvalsh(A.as_dense())
    assert ev[0] > 0
    assert A.symmetry_error() <= 1e-12


@pytest.mark.parametrize("assembler", [assemble_relaxed, assemble_further_relaxed])
def test_assemblers_symmetric_and_spd(assembler):
    spaces = build_spaces(build_box_mesh((2, 2, 2)))
    A = assembler(spaces, iso_to_tensors(params()))
    assert A.symmetry_error() <= 1e-12
    ev = np.linalg.eigvalsh(A.as_dense())
    assert ev[0] > 0


def test_zero_loads_give_zero_solution():
    spaces = build_spaces(build_box_mesh((2, 2, 2)))
    A = assemble_relaxed(spaces, iso_to_tensors(params()))
    b = np.zeros(A.dimension)
    rep = solve(A, b, tol=1e-12)
    assert np.all(rep.x == 0)
    assert rep.energy == 0.0


def test_further_relaxed_spherical_P_identity():
    # the dev projections kill spherical micro-distortion content:
    # relaxed(w) - further(w) = (2 mu_h + 3 lam_h)/3 |tr P|^2 + a3 |tr Curl P|^2
    mesh = build_box_mesh((2, 2, 2))
    spaces = build_spaces(mesh)
    p = params()
    T = iso_to_tensors(p)
    A_rel = assemble_relaxed(spaces, T)
    A_fur = assemble_further_relaxed(spaces, T)
    tr_p = assemble_quadratic_form(
        None, spaces[1], [FormTerm("P", P_SPH_WEIGHT, "P")])
    tr_c = assemble_quadratic_form(
        None, spaces[1], [FormTerm("curl_P", P_SPH_WEIGHT, "curl_P")])
    rng = np.random.default_rng(0)
    nu = spaces[0].n_dofs
    for _ in range(10):
        w = rng.standard_normal(A_rel.dimension)
        wp = w[nu:]
        diff = w @ (A_rel.matrix @ w) - w @ (A_fur.matrix @ w)
        expect = ((2 * p.mu_h + 3 * p.lambda_h) / 3.0 * (wp @ (tr_p.matrix @ wp))
                  + p.a3 * (wp @ (tr_c.matrix @ wp)))
        assert diff == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_further_relaxed_h_term_sees_only_devsym():
    # H-only parameters: the further-relaxed energy must equal the
    # quadrature integral of 2 mu_h |dev sym P_h|^2, i.e. the spherical
    # part of P contributes nothing
    mesh = build_box_mesh((2, 2, 2))
    spaces = build_spaces(mesh)
    p = params(mu_e=0.0, lambda_e=0.0, a1=0.0, a2=0.0, a3=0.0)

    def spherical_field(x):
        return (x[0] * (1 - x[0])) * np.eye(3)

    P = interpolate_P(spaces[1], spherical_field)
    w = np.concatenate([np.zeros(spaces[0].n_dofs), P.coefficients])
    A_fur = assemble_further_relaxed(spaces, iso_to_tensors(p))
    e_fur = w @ (A_fur.matrix @ w)
    qp, qw = tet_rule(2)
    expect = 0.0
    for t in range(mesh.num_tets):
        vol = spaces[1].elements.volumes[t]
        for iq in range(len(qw)):
            pv = eval_P(P, t, qp[iq])
            ds = 0.5 * (pv + pv.T) - np.trace(pv) / 3.0 * np.eye(3)
            expect += qw[iq] * vol * 2 * p.mu_h * np.sum(ds * ds)
    assert e_fur == pytest.approx(expect, rel=1e-12, abs=1e-14)
    # and a pointwise spherical value produces no dev-sym energy density
    ds = spherical_field(np.array([0.3, 0.4, 0.5]))
    dev = 0.5 * (ds + ds.T) - np.trace(ds) / 3.0 * np.eye(3)
    assert np.abs(dev).max() == 0.0


def test_gauge_assembly_spd():
    spaces = build_spaces(build_box_mesh((2, 2, 2)))
    for mu_c in (0.7, 0.0):
        T = iso_to_tensors(params(mu_c=mu_c, mu_h=0.0, lambda_h=0.0))
        A = assemble_gauge(spaces[1], T)
        assert A.symmetry_error() <= 1e-12
        ev = np.linalg.eigvalsh(A.as_dense())
        assert ev[0] > 0


def test_gauge_cross_terms_symmetric():
    rng = np.random.default_rng(1)
    spaces = build_spaces(build_box_mesh((1, 1, 1)))
    T = iso_to_tensors(params(mu_c=0.3, mu_h=0.0, lambda_h=0.0))
    B = rng.standard_normal((3, 3, 3, 3))
    T = type(T)(C=T.C, H=T.H, Lc=T.Lc, B=B)
    A = assemble_gauge(spaces[1], T)
    assert A.symmetry_error() <= 1e-12


def test_load_zero():
    spaces = build_spaces(build_box_mesh((2, 2, 2)))
    b = assemble_load(spaces, f=None, M=None)
    assert np.all(b == 0)


def test_constant_force_hat_integral():
    # the single interior vertex of the n=2 mesh: the hat-function integral
    # equals sum of |tet|/4 over its star
    mesh = build_box_mesh((2, 2, 2))
    spaces = build_spaces(mesh)
    fvec = np.array([2.0, -1.0, 0.5])
    b = assemble_load(spaces, f=lambda x: fvec)
    center = np.nonzero(spaces[0].vertex_dof >= 0)[0][0]
    star = [t for t in range(mesh.num_tets) if center in mesh.tets[t]]
    hat_integral = sum(mesh.tet_volume(t) / 4.0 for t in star)
    assert np.allclose(b[:3], fvec * hat_integral, rtol=1e-13)


def test_constant_sigma0_orthogonal_to_gradients():
    # l(grad tau) = boundary flux = 0 for constant sigma0 and tau in H^1_0
    spaces = build_spaces(build_box_mesh((2, 2, 2)))
    sigma0 = np.array([[1.0, 2, 0], [0, -1, 3], [0.5, 0, 2.0]])
    b = assemble_gauge_load(spaces[1], lambda x: sigma0)
    G = gradient_inclusion_matrix(*spaces)
    rng = np.random.default_rng(2)
    for _ in range(10):
        tau = rng.standard_normal(spaces[0].n_dofs)
        assert abs(b @ (G @ tau)) < 1e-13 * max(1.0, np.linalg.norm(b))


def test_energy_consistency_against_quadrature_oracle():
    # assembled quadratic form on interpolants of smooth fields converges
    # at O(h^2) to the exact energy integral (degree-5 quadrature oracle)
    p = params()
    T = iso_to_tensors(p)

    def u_exact(x):
        s = np.sin(np.pi * x)
        return np.array([0.3, -0.2, 0.1]) * s[0] * s[1] * s[2]

    def P_exact(x):
        s = np.sin(np.pi * x)
        c = np.cos(np.pi * x)
        cols = np.array([c[0] * s[1] * s[2], s[0] * c[1] * s[2], s[0] * s[1] * c[2]])
        amp = np.array([[0.2, -0.1, 0.15], [0.05, 0.25, -0.2], [-0.15, 0.1, 0.3]])
        return amp * cols[None, :]

    def energy_density(gradu, P, curlP):
        e = gradu - P
        se = 0.5 * (e + e.T)
        sp = 0.5 * (P + P.T)
        return (np.tensordot(np.tensordot(T.C, e, axes=2), e)
                + np.tensordot(np.tensordot(T.H, sp, axes=2), sp)
                + np.tensordot(np.tensordot(T.Lc, curlP, axes=2), curlP))

    gaps = []
    for n in (2, 4, 8):
        mesh = build_box_mesh((n, n, n))
        spaces = build_spaces(mesh)
        A = assemble_relaxed(spaces, T)
        u_h = interpolate_u(spaces[0], u_exact)
        P_h = interpolate_P(spaces[1], P_exact)
        w = np.concatenate([u_h.coefficients, P_h.coefficients])
        assembled = w @ (A.matrix @ w)
        qp, qw = tet_rule(5)
        exact = 0.0
        for t in range(mesh.num_tets):
            verts = spaces[0].elements.verts[t]
            vol = spaces[0].elements.volumes[t]
            gu = eval_grad_u(u_h, t)
            cp = eval_curl_P(P_h, t)
            for iq in range(len(qw)):
                pv = eval_P(P_h, t, qp[iq])
                exact += qw[iq] * vol * energy_density(gu, pv, cp)
        # quadrature agreement on the discrete fields is exact by design
        assert assembled == pytest.approx(exact, rel=1e-12)
        # and the assembled energy approaches the smooth-field energy
        exact_smooth = 0.0
        for t in range(mesh.num_tets):
            verts = spaces[0].elements.verts[t]
            vol = spaces[0].elements.volumes[t]
            xs = physical_points(qp, verts)
            for iq in range(len(qw)):
                x = xs[iq]
                h = 1e-6
                gu = np.empty((3, 3))
                for j in range(3):
                    e = np.zeros(3)
                    e[j] = h
                    gu[:, j] = (u_exact(x + e) - u_exact(x - e)) / (2 * h)
                cp = np.empty((3, 3))
                d = [(P_exact(x + np.eye(3)[k] * h) - P_exact(x - np.eye(3)[k] * h))
                     / (2 * h) for k in range(3)]
                for i in range(3):
                    cp[i] = (d[1][i, 2] - d[2][i, 1], d[2][i, 0] - d[0][i, 2],
                             d[0][i, 1] - d[1][i, 0])
                exact_smooth += qw[iq] * vol * energy_density(gu, P_exact(x), cp)
        gaps.append(abs(assembled - exact_smooth))
    assert gaps[1] / gaps[0] < 0.45
    assert gaps[2] / gaps[1] < 0.45


def test_threads_bitwise_identical():
    spaces = build_spaces(build_box_mesh((2, 2, 2)))
    T = iso_to_tensors(params())
    A1 = assemble_relaxed(spaces, T, threads=1)
    A4 = assemble_relaxed(spaces, T, threads=4)
    assert (A1.matrix != A4.matrix).nnz == 0
    b1 = assemble_load(spaces, f=lambda x: np.array([1.0, 2.0, 3.0]))
    b4 = assemble_load(spaces, f=lambda x: np.array([1.0, 2.0, 3.0]), threads=4)
    assert np.array_equal(b1, b4)


def test_matrix_market_dump_roundtrip(tmp_path):
    from scipy.io import mmread

    spaces = build_spaces(build_box_mesh((1, 1, 1)))
    A = assemble_relaxed(spaces, iso_to_tensors(params()))
    path = tmp_path / "system.mtx"
    dump_matrix_market(str(path), A)
    back = mmread(str(path)).tocsr()
    assert np.abs((back - A.matrix).toarray()).max() < 1e-15
