import numpy as np
import pytest
from scipy.sparse import csr_matrix, identity

from micromorph.assembly import SystemMatrix
from micromorph.coercivity import (INEQUALITY_KINDS, _gradient_deflator,
                                   _smallest_dense, assemble_pencil,
                                   estimate_constant, monotonicity_study,
                                   smallest_eigenvalue, study_to_csv)
from micromorph.constitutive import IsotropicParams
from micromorph.mesh import build_box_mesh
from micromorph.spaces import build_spaces


def params():
    return IsotropicParams(mu_e=2.0, lambda_e=1.0, mu_c=0.0, mu_h=1.5,
                           lambda_h=0.5, a1=1.0, a2=2.0, a3=3.0)


def wrap(mat):
    return SystemMatrix(matrix=csr_matrix(mat), n_dofs_u=0, n_dofs_p=mat.shape[0])


def test_trivial_pencils():
    rng = np.random.default_rng(0)
    Q = rng.standard_normal((8, 8))
    D = Q @ Q.T + 8 * np.eye(8)
    lam, _ = smallest_eigenvalue(wrap(D), wrap(D))
    assert lam == pytest.approx(1.0, abs=1e-12)
    lam, _ = smallest_eigenvalue(wrap(2 * D), wrap(D))
    assert lam == pytest.approx(2.0, abs=1e-12)


def test_pencil_dimension_mismatch():
    with pytest.raises(ValueError):
        smallest_eigenvalue(wrap(np.eye(3)), wrap(np.eye(4)))


def test_thm1_single_cell_against_dense():
    spaces = build_spaces(build_box_mesh((1, 1, 1)))
    N, D = assemble_pencil("SymCurl_vs_L2", spaces)
    assert N.dimension == 3 and D.dimension == 3
    evD = np.linalg.eigvalsh(D.as_dense())
    assert evD[0] > 0
    lam, _ = smallest_eigenvalue(N, D)
    from scipy.linalg import eigh
    w = eigh(N.as_dense(), D.as_dense(), eigvals_only=True)
    assert lam == pytest.approx(w[0], abs=1e-10)


def test_devsymgrad_pencil_structure():
    spaces = build_spaces(build_box_mesh((2, 2, 2)))
    N, D = assemble_pencil("DevSymGrad", spaces)
    assert N.dimension == 3  # single interior vertex, three components
    lam, _ = smallest_eigenvalue(N, D)
    assert 0 < lam <= 1.0  # |dev sym grad u| <= |grad u|


def test_all_kinds_positive_on_constrained_space():
    p = params()
    for kind in INEQUALITY_KINDS:
        est = estimate_constant(kind, 2, params=p)
        assert est.lambda_min > 0, kind
        assert np.isfinite(est.constant)


def test_negative_control_without_boundary_conditions():
    est = estimate_constant("SymCurl_vs_L2", 1, constrained=False)
    assert abs(est.lambda_min) <= 1e-10


def test_dev_curl_constant_at_least_one():
    # |dev X| <= |X| pointwise, so lambda_min <= 1 and the constant >= 1
    est = estimate_constant("DevCurl", 2)
    assert est.lambda_min <= 1.0 + 1e-12
    assert est.constant >= 1.0 - 1e-12


def test_thm2_below_thm1():
    for n in (1, 2):
        e1 = estimate_constant("SymCurl_vs_L2", n)
        e2 = estimate_constant("SymCurl_vs_HCurl", n)
        assert e2.lambda_min <= e1.lambda_min + 1e-12


def test_sparse_matches_dense_oracle():
    p = params()
    spaces = build_spaces(build_box_mesh((4, 4, 4)))
    for kind in ("SymCurl_vs_L2", "DevCurl", "KornCombined"):
        N, D = assemble_pencil(kind, spaces, params=p)
        deflate = _gradient_deflator(spaces) if kind == "DevCurl" else None
        reg = None
        if kind == "DevCurl":
            rho = 1e-3 * float(np.mean(N.matrix.diagonal()))
            reg = rho * identity(N.dimension, format="csr")
        lam_sparse, _ = smallest_eigenvalue(N, D, deflate=deflate,
                                            regularizer=reg)
        lam_dense, _ = _smallest_dense(N.as_dense(), D.as_dense())
        assert lam_sparse == pytest.approx(lam_dense, rel=1e-8)


def test_monotonicity_small_levels():
    p = params()
    for kind, ns in (("SymCurl_vs_L2", (1, 2, 4)), ("DevSymGrad", (2, 4))):
        ests = monotonicity_study(kind, ns=ns, params=p)
        lams = [e.lambda_min for e in ests]
        for a, b in zip(lams, lams[1:]):
            assert b <= a + 1e-10
        assert all(l > 0 for l in lams)


def test_empty_space_rejected():
    with pytest.raises(ValueError, match="empty"):
        estimate_constant("DevSymGrad", 1)


def test_needs_params_for_combined_kinds():
    spaces = build_spaces(build_box_mesh((1, 1, 1)))
    with pytest.raises(ValueError, match="parameters"):
        assemble_pencil("KornCombined", spaces)


def test_unknown_kind_rejected():
    spaces = build_spaces(build_box_mesh((1, 1, 1)))
    with pytest.raises(ValueError, match="unknown"):
        assemble_pencil("NoSuchInequality", spaces)


def test_csv_output():
    ests = monotonicity_study("DevSymGrad", ns=(2, 4))
    csv = study_to_csv(ests)
    lines = csv.strip().splitlines()
    assert lines[0] == "spec,level,dofs,lambda_min,constant"
    assert len(lines) == 3
    assert lines[1].startswith("DevSymGrad,0,")
