"""Linear solves, energy evaluation and manufactured-solution
convergence studies.

The default solver is conjugate gradients with a Jacobi preconditioner;
systems below DENSE_LIMIT unknowns fall back to a dense factorization
used as the oracle path in tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import (SystemMatrix, assemble_further_relaxed, assemble_load,
                       assemble_relaxed)
from .constitutive import IsotropicParams, iso_to_tensors
from .mesh import build_box_mesh, mesh_size
from .quadrature import physical_points, tet_rule
from .spaces import (DiscreteField, build_spaces, eval_curl_P, eval_grad_u,
                     eval_P, eval_u)

DENSE_LIMIT = 500


class SolverError(RuntimeError):
    pass


class NotSPDError(SolverError):
    """Raised when CG detects a direction of non-positive curvature."""


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    relative_residual: float
    energy: float
    method: str


def solve_cg(A: SystemMatrix, b: np.ndarray, tol: float = 1e-10,
             max_iter: int | None = None, x0: np.ndarray | None = None) -> SolveReport:
    """Jacobi-preconditioned conjugate gradients on an SPD system."""
    mat = A.matrix
    n = mat.shape[0]
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise ValueError("load vector does not match system dimension")
    if max_iter is None:
        max_iter = 20 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        # the SPD system with zero load has the zero minimizer
        return SolveReport(x=np.zeros(n), iterations=0, relative_residual=0.0,
                           energy=0.0, method="cg")

    diag = mat.diagonal().copy()
    if np.any(diag <= 0):
        raise NotSPDError("non-positive diagonal entry; system is not SPD")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - mat @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            break
        Ap = mat @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NotSPDError(f"negative curvature p.Ap = {pAp:g} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    else:
        raise SolverError(f"CG did not converge within {max_iter} iterations "
                          f"(residual {np.linalg.norm(r) / bnorm:.3e})")
    energy = 0.5 * x @ (mat @ x) - b @ x
    return SolveReport(x=x, iterations=it,
                       relative_residual=float(np.linalg.norm(b - mat @ x) / bnorm),
                       energy=float(energy), method="cg")


def solve_dense(A: SystemMatrix, b: np.ndarray) -> SolveReport:
    """Dense factorization fallback for small systems (oracle path)."""
    mat = A.as_dense()
    x = np.linalg.solve(mat, np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(b - mat @ x) / bnorm if bnorm > 0 else 0.0
    energy = 0.5 * x @ (mat @ x) - b @ x
    return SolveReport(x=x, iterations=1, relative_residual=float(res),
                       energy=float(energy), method="dense")


def solve(A: SystemMatrix, b: np.ndarray, tol: float = 1e-10,
          max_iter: int | None = None, x0=None) -> SolveReport:
    if A.dimension < DENSE_LIMIT and x0 is None:
        return solve_dense(A, b)
    return solve_cg(A, b, tol=tol, max_iter=max_iter, x0=x0)


def energy_value(A: SystemMatrix, x: np.ndarray, b: np.ndarray) -> float:
    """Variational energy 0.5 <Ax, x> - <b, x>."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(0.5 * x @ (A.matrix @ x) - b @ x)


# ---------------------------------------------------------------------------
# manufactured-solution convergence study
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    level: int
    h: float
    err_u: float
    err_p: float
    combined: float
    rate: float | None


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    def observed_rates(self):
        return [r.rate for r in self.rows if r.rate is not None]

    def to_csv(self) -> str:
        lines = ["level,h,err_u,err_P,combined,rate"]
        for r in self.rows:
            rate = "" if r.rate is None else f"{r.rate:.6f}"
            lines.append(f"{r.level},{r.h:.10g},{r.err_u:.10g},"
                         f"{r.err_p:.10g},{r.combined:.10g},{rate}")
        return "\n".join(lines) + "\n"


def _error_norms(u_field, p_field, exact, degree: int = 5):
    """H1 error of u, H(Curl) error of P and the combined model norm.

    The combined norm squares ||u||_H1^2 + ||sym P||^2 + ||Curl P||^2
    of the error pair.
    """
    space_u = u_field.space
    space_p = p_field.space
    mesh = space_u.mesh
    qp, qw = tet_rule(degree)
    err_u_sq = 0.0
    err_p_sq = 0.0
    comb_sq = 0.0
    for t in range(mesh.num_tets):
        verts = space_u.elements.verts[t]
        vol = space_u.elements.volumes[t]
        xs = physical_points(qp, verts)
        gu_h = eval_grad_u(u_field, t)
        cp_h = eval_curl_P(p_field, t)
        for iq in range(len(qw)):
            x = xs[iq]
            w = qw[iq] * vol
            du = exact.u(x) - eval_u(u_field, t, qp[iq])
            dgu = exact.grad_u(x) - gu_h
            dp = exact.P(x) - eval_P(p_field, t, qp[iq])
            dcp = exact.curl_P(x) - cp_h
            u_sq = du @ du + np.sum(dgu * dgu)
            sym_dp = 0.5 * (dp + dp.T)
            err_u_sq += w * u_sq
            err_p_sq += w * (np.sum(dp * dp) + np.sum(dcp * dcp))
            comb_sq += w * (u_sq + np.sum(sym_dp * sym_dp) + np.sum(dcp * dcp))
    return np.sqrt(err_u_sq), np.sqrt(err_p_sq), np.sqrt(comb_sq)


def _check_boundary_traces(exact, mesh, tol=1e-10):
    lo, hi = np.asarray(mesh.bounds[0]), np.asarray(mesh.bounds[1])
    rng = np.random.default_rng(7)
    for axis in range(3):
        for side in (lo, hi):
            for _ in range(8):
                x = lo + rng.random(3) * (hi - lo)
                x[axis] = side[axis]
                if np.max(np.abs(exact.u(x))) > tol:
                    raise ValueError("exact u violates the boundary condition")
                P = exact.P(x)
                tangents = [d for d in range(3) if d != axis]
                if np.max(np.abs(P[:, tangents])) > tol:
                    raise ValueError("exact P violates the tangential condition")


def manufactured_study(model: str, exact, params: IsotropicParams, levels,
                       tol: float = 1e-10, threads: int = 1) -> ConvergenceTable:
    """Convergence of the FE solution against a smooth exact pair.

    `exact` provides callables u, grad_u, P, curl_P, f, M (see the
    manufactured module).  Loads must already be the closed forms of the
    strong equations; they are validated elsewhere against the
    finite-difference strong-form oracle.
    """
    if model not in ("relaxed", "further_relaxed"):
        raise ValueError("model must be 'relaxed' or 'further_relaxed'")
    T = iso_to_tensors(params)
    table = ConvergenceTable()
    prev_err = None
    prev_h = None
    for level, n in enumerate(levels):
        mesh = build_box_mesh(n)
        _check_boundary_traces(exact, mesh)
        spaces = build_spaces(mesh)
        if model == "relaxed":
            A = assemble_relaxed(spaces, T, threads=threads)
        else:
            A = assemble_further_relaxed(spaces, T, threads=threads)
        b = assemble_load(spaces, f=exact.f, M=exact.M, threads=threads)
        rep = solve(A, b, tol=tol)
        nu = spaces[0].n_dofs
        u_h = DiscreteField(spaces[0], rep.x[:nu])
        p_h = DiscreteField(spaces[1], rep.x[nu:])
        err_u, err_p, comb = _error_norms(u_h, p_h, exact)
        h = mesh_size(mesh)
        rate = None
        if prev_err is not None:
            rate = float(np.log2(prev_err / comb) / np.log2(prev_h / h))
        table.rows.append(ConvergenceRow(level=level, h=h, err_u=err_u,
                                         err_p=err_p, combined=comb, rate=rate))
        prev_err, prev_h = comb, h
    return table


def galerkin_residual(A: SystemMatrix, x, b, n_tests: int = 20, seed: int = 0) -> float:
    """Largest normalized residual of the weak form against random test vectors."""
    rng = np.random.default_rng(seed)
    r = b - A.matrix @ x
    scale = max(np.linalg.norm(b), np.linalg.norm(A.matrix @ x), 1e-300)
    worst = 0.0
    for _ in range(n_tests):
        w = rng.standard_normal(A.dimension)
        w /= np.linalg.norm(w)
        worst = max(worst, abs(r @ w) / scale)
    return worst
