import numpy as np
import pytest
from scipy.sparse import csr_matrix

from micromorph.assembly import SystemMatrix, assemble_load, assemble_relaxed
from micromorph.constitutive import IsotropicParams, iso_to_tensors
from micromorph.mesh import build_box_mesh
from micromorph.solver import (NotSPDError, SolverError, energy_value,
                               galerkin_residual, solve, solve_cg, solve_dense)
from micromorph.spaces import build_spaces


def params():
    return IsotropicParams(mu_e=2.0, lambda_e=1.0, mu_c=0.0, mu_h=1.5,
                           lambda_h=0.5, a1=1.0, a2=2.0, a3=3.0)


def small_system(n=2):
    spaces = build_spaces(build_box_mesh((n, n, n)))
    A = assemble_relaxed(spaces, iso_to_tensors(params()))
    b = assemble_load(spaces, f=lambda x: np.array([1.0, -0.5, 0.25]),
                      M=lambda x: np.diag([0.2, -0.1, 0.3]))
    return A, b


def test_zero_rhs_returns_zero():
    A, _ = small_system()
    rep = solve_cg(A, np.zeros(A.dimension))
    assert rep.iterations == 0
    assert np.all(rep.x == 0)
    assert rep.energy == 0.0


def test_cg_matches_dense_oracle():
    A, b = small_system()
    rep_cg = solve_cg(A, b, tol=1e-13)
    rep_dense = solve_dense(A, b)
    scale = np.abs(rep_dense.x).max()
    assert np.abs(rep_cg.x - rep_dense.x).max() <= 1e-12 * max(1.0, scale)


def test_single_cell_matches_dense():
    spaces = build_spaces(build_box_mesh((1, 1, 1)))
    A = assemble_relaxed(spaces, iso_to_tensors(params()))
    rng = np.random.default_rng(0)
    b = rng.standard_normal(3)
    rep = solve_cg(A, b, tol=1e-14)
    x_dense = np.linalg.solve(A.as_dense(), b)
    assert np.abs(rep.x - x_dense).max() <= 1e-12 * np.abs(x_dense).max()


def test_two_random_starts_agree():
    A, b = small_system()
    rng = np.random.default_rng(1)
    tol = 1e-11
    r1 = solve_cg(A, b, tol=tol, x0=rng.standard_normal(A.dimension))
    r2 = solve_cg(A, b, tol=tol, x0=rng.standard_normal(A.dimension))
    scale = np.linalg.norm(r1.x)
    assert np.linalg.norm(r1.x - r2.x) <= 10 * tol * scale


def test_non_spd_detected():
    M = csr_matrix(np.diag([1.0, -1.0, 1.0]))
    A = SystemMatrix(matrix=M, n_dofs_u=0, n_dofs_p=3)
    with pytest.raises(NotSPDError):
        solve_cg(A, np.ones(3))


def test_max_iter_exceeded_reported():
    A, b = small_system()
    with pytest.raises(SolverError, match="did not converge"):
        solve_cg(A, b, tol=1e-14, max_iter=2)


def test_energy_identities():
    A, b = small_system()
    rep = solve(A, b, tol=1e-12)
    # at the solution: energy = -1/2 <b, x>
    assert rep.energy == pytest.approx(-0.5 * b @ rep.x, rel=1e-10)
    assert energy_value(A, rep.x, b) == pytest.approx(rep.energy, rel=1e-12)


def test_solution_minimizes_energy():
    A, b = small_system()
    rep = solve(A, b, tol=1e-12)
    rng = np.random.default_rng(2)
    e0 = energy_value(A, rep.x, b)
    for _ in range(50):
        pert = rep.x + rng.standard_normal(A.dimension) * 0.1
        assert energy_value(A, pert, b) >= e0 - 1e-12


def test_galerkin_orthogonality():
    A, b = small_system()
    tol = 1e-12
    rep = solve_cg(A, b, tol=tol)
    assert galerkin_residual(A, rep.x, b) <= 10 * tol


def test_monotone_energy_under_refinement():
    T = iso_to_tensors(params())
    f = lambda x: np.array([1.0, 0.0, 0.0])
    M = lambda x: np.diag([0.1, 0.2, -0.3])
    energies = []
    for n in (1, 2, 4):
        spaces = build_spaces(build_box_mesh((n, n, n)))
        A = assemble_relaxed(spaces, T)
        b = assemble_load(spaces, f=f, M=M)
        energies.append(solve(A, b, tol=1e-12).energy)
    assert energies[1] <= energies[0] + 1e-12
    assert energies[2] <= energies[1] + 1e-12


def test_solver_determinism():
    A, b = small_system()
    r1 = solve_cg(A, b, tol=1e-11)
    r2 = solve_cg(A, b, tol=1e-11)
    assert np.array_equal(r1.x, r2.x)
    assert r1.iterations == r2.iterations
