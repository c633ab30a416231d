"""Discrete best constants of the coercive inequalities as generalized
eigenvalue problems.

Each inequality kind pairs a numerator form N (the majorizing side,
squared) with a denominator form D (the minorized side, squared) on an
H_0-constrained FE space; lambda_min of N x = lambda D x is the
discrete best constant squared-inverse: constant = lambda_min^(-1/2).
Constants computed on a discrete subspace are lower bounds of the
continuous ones; refinement enlarges the space, so lambda_min is
non-increasing under refinement.

Pencils with a singular denominator (the dev-Curl inequality, whose
forms both vanish on discrete gradients) are reduced by deflating the
common kernel; the dense path handles arbitrary kernels through a Schur
complement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .assembly import (FormTerm, P_DEV, P_DEVSYM, P_ID, P_SYM, SystemMatrix,
                       assemble_quadratic_form)
from .constitutive import IsotropicParams, iso_to_tensors
from .mesh import build_box_mesh, mesh_size
from .solver import NotSPDError, SolverError
from .spaces import build_spaces, gradient_inclusion_matrix

DENSE_LIMIT = 500

INEQUALITY_KINDS = (
    "SymCurl_vs_L2",          # ||P|| <= c (||sym P||^2 + ||Curl P||^2)^(1/2)
    "SymCurl_vs_HCurl",       # ||P||_H(Curl) <= c |||P|||
    "DevCurl",                # ||Curl P|| <= C ||dev Curl P||
    "DevSymDevCurl",          # ||P||^2 <= C^2 (||dev sym P||^2 + ||dev Curl P||^2)
    "DevSymDevCurl_Corollary",  # squared-vs-squared reading of the corollary
    "DevSymGrad",             # ||grad u|| <= C ||dev sym grad u||
    "KornCombined",           # a1 (||sym grad u||^2 + ||sym P||^2) <= C/H form
    "DevCombined",            # a2 (||grad u||^2 + ||dev sym P||^2) <= C/H-dev form
)


def _norm_term(field, proj=None):
    if proj is None:
        return FormTerm(field, P_ID, field)
    return FormTerm(field, proj, field, proj_b=proj)


@dataclass
class ConstantEstimate:
    kind: str
    lambda_min: float
    constant: float
    level: int
    dofs: int
    h: float | None = None


def assemble_pencil(kind: str, spaces, params: IsotropicParams | None = None,
                    threads: int = 1):
    """Numerator and denominator matrices of an inequality kind.

    P-only kinds use the micro-distortion space, DevSymGrad the
    displacement space, the combined lemmas both.
    """
    u_space, p_space = spaces
    needs_params = kind in ("KornCombined", "DevCombined")
    if needs_params and params is None:
        raise ValueError(f"{kind} needs material parameters")
    if needs_params:
        T = iso_to_tensors(params)
        C9 = T.C.reshape(9, 9)
        H9 = T.H.reshape(9, 9)

    if kind == "SymCurl_vs_L2":
        N = [_norm_term("P", P_SYM), _norm_term("curl_P")]
        D = [_norm_term("P")]
        args = (None, p_space)
    elif kind == "SymCurl_vs_HCurl":
        N = [_norm_term("P", P_SYM), _norm_term("curl_P")]
        D = [_norm_term("P"), _norm_term("curl_P")]
        args = (None, p_space)
    elif kind == "DevCurl":
        N = [_norm_term("curl_P", P_DEV)]
        D = [_norm_term("curl_P")]
        args = (None, p_space)
    elif kind == "DevSymDevCurl":
        N = [_norm_term("P", P_DEVSYM), _norm_term("curl_P", P_DEV)]
        D = [_norm_term("P")]
        args = (None, p_space)
    elif kind == "DevSymDevCurl_Corollary":
        N = [_norm_term("P", P_DEVSYM), _norm_term("curl_P", P_DEV)]
        D = [_norm_term("P"), _norm_term("curl_P")]
        args = (None, p_space)
    elif kind == "DevSymGrad":
        N = [_norm_term("grad_u", P_DEVSYM)]
        D = [_norm_term("grad_u")]
        args = (u_space, None)
    elif kind == "KornCombined":
        N = [FormTerm("e", C9 @ P_SYM, "e", proj_b=P_SYM),
             FormTerm("P", H9 @ P_SYM, "P", proj_b=P_SYM)]
        D = [_norm_term("grad_u", P_SYM), _norm_term("P", P_SYM)]
        args = (u_space, p_space)
    elif kind == "DevCombined":
        N = [FormTerm("e", C9 @ P_SYM, "e", proj_b=P_SYM),
             FormTerm("P", H9 @ P_DEVSYM, "P", proj_b=P_DEVSYM)]
        D = [_norm_term("grad_u"), _norm_term("P", P_DEVSYM)]
        args = (u_space, p_space)
    else:
        raise ValueError(f"unknown inequality kind {kind!r}")

    Nmat = assemble_quadratic_form(args[0], args[1], N, threads=threads)
    Dmat = assemble_quadratic_form(args[0], args[1], D, threads=threads)
    return Nmat, Dmat


def _gradient_deflator(spaces):
    """Euclidean projector onto the complement of the discrete gradients."""
    u_space, p_space = spaces
    G = gradient_inclusion_matrix(u_space, p_space)
    if G.shape[1] == 0:
        return None
    GtG = (G.T @ G).toarray()
    chol = cho_factor(GtG)

    def project(x):
        return x - G @ cho_solve(chol, G.T @ x)

    return project


def smallest_eigenvalue(N: SystemMatrix, D: SystemMatrix, tol: float = 1e-10,
                        deflate=None, max_outer: int = 200, seed: int = 0,
                        regularizer=None) -> tuple:
    """(lambda_min, eigvec) of N x = lambda D x.

    Small systems go through a dense generalized eigensolve with kernel
    reduction; larger ones through shifted block inverse iteration with
    preconditioned-CG inner solves.
    """
    if N.dimension != D.dimension:
        raise ValueError("pencil matrices differ in dimension")
    if N.dimension == 0:
        raise ValueError("the constrained space is empty on this mesh")
    if N.dimension < DENSE_LIMIT:
        return _smallest_dense(N.as_dense(), D.as_dense())
    return _smallest_inverse_iteration(N.matrix, D.matrix, tol=tol,
                                       deflate=deflate, max_outer=max_outer,
                                       seed=seed, regularizer=regularizer)


def _smallest_dense(Nd, Dd, kernel_tol: float = 1e-10):
    Nd = 0.5 * (Nd + Nd.T)
    Dd = 0.5 * (Dd + Dd.T)
    evals, evecs = eigh(Dd)
    thr = kernel_tol * max(evals.max(), 1e-300)
    ker = evals <= thr
    if not np.any(ker):
        w, v = eigh(Nd, Dd)
        return float(w[0]), v[:, 0]
    V = evecs[:, ~ker]
    K = evecs[:, ker]
    NVV = V.T @ Nd @ V
    NVK = V.T @ Nd @ K
    NKK = K.T @ Nd @ K
    # minimize N over the kernel directions: Schur complement
    NVV_red = NVV - NVK @ np.linalg.pinv(NKK, rcond=1e-12) @ NVK.T
    DVV = np.diag(evals[~ker])
    w, v = eigh(0.5 * (NVV_red + NVV_red.T), DVV)
    return float(w[0]), V @ v[:, 0]


def _cg_project(mat, b, tol, max_iter, project, x0=None, prec=None):
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
        r = b - mat @ x
    if prec is None:
        diag = mat.diagonal()
        if np.any(diag <= 0):
            raise NotSPDError("inner CG: non-positive diagonal")
        inv_diag = 1.0 / diag
        prec = lambda v: inv_diag * v

    def precondition(v):
        z = prec(v)
        return project(z) if project is not None else z

    z = precondition(r)
    p = z.copy()
    rz = r @ z
    bnorm = max(np.linalg.norm(b), 1e-300)
    for _ in range(max_iter):
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        Ap = mat @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NotSPDError("inner CG: negative curvature")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = precondition(r)
        rz_new = r @ z
        if rz_new <= 0.0 and np.linalg.norm(r) > tol * bnorm:
            raise NotSPDError("inner CG: preconditioner lost definiteness")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x  # caller checks the Rayleigh sequence, not the inner residual


def _smallest_inverse_iteration(Nmat, Dmat, tol, deflate, max_outer, seed,
                                block: int = 6, regularizer=None):
    """Block shifted inverse iteration with Rayleigh-Ritz extraction.

    A block survives eigenvalue clusters at the bottom of the spectrum
    that defeat single-vector iteration.  Inner solves are CG with an
    incomplete-LU preconditioner of the shifted matrix, rebuilt only
    when the shift moves appreciably; `regularizer` is added to the
    factored matrix alone to keep the factorization stable when the
    pencil has a (deflated) common kernel.
    """
    from scipy.sparse import csc_matrix
    from scipy.sparse.linalg import splu

    n = Nmat.shape[0]
    b = min(block, n)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, b))
    if deflate is not None:
        for j in range(b):
            X[:, j] = deflate(X[:, j])
    X = _d_orthonormalize(X, Dmat, rng, deflate)

    sigma = 0.0
    prec_sigma = None
    prec = None

    def make_prec(s):
        # complete sparse LU of the shifted matrix; CG then converges in
        # a couple of steps and certifies positive definiteness.  A tiny
        # diagonal regularization keeps the factorization stable when the
        # pencil carries a deflated common kernel.
        A = Nmat if s == 0.0 else (Nmat - s * Dmat)
        if regularizer is not None:
            A = A + regularizer
        lu = splu(csc_matrix(A))
        return lu.solve

    def probe_indefinite(s, start):
        A = Nmat - s * Dmat
        return _lanczos_indefinite(A, start, deflate)

    import os
    debug = bool(os.environ.get("MICROMORPH_EIG_DEBUG"))

    history: list = []
    last_shift_it = 0
    fails = 0
    for it in range(max_outer):
        if prec is None or prec_sigma is None or sigma != prec_sigma:
            prec = make_prec(sigma)
            prec_sigma = sigma
        shifted = Nmat if sigma == 0.0 else (Nmat - sigma * Dmat).tocsr()
        Y = np.empty_like(X)
        try:
            for j in range(b):
                rhs = Dmat @ X[:, j]
                if deflate is not None:
                    rhs = deflate(rhs)
                Y[:, j] = _cg_project(shifted, rhs, 1e-11, 200, deflate,
                                      prec=prec)
                if deflate is not None:
                    Y[:, j] = deflate(Y[:, j])
        except NotSPDError:
            sigma = _retreat_shift(sigma, history, fails)
            fails += 1
            if debug:
                print(f"    [eig] it {it}: NotSPD, retreat to sigma={sigma!r}")
            prec = None
            continue
        X = _d_orthonormalize(Y, Dmat, rng, deflate)
        # Rayleigh-Ritz on the block
        A_r = X.T @ (Nmat @ X)
        B_r = X.T @ (Dmat @ X)
        w, V = eigh(0.5 * (A_r + A_r.T), 0.5 * (B_r + B_r.T))
        X = X @ V
        lam = float(w[0])
        history.append(lam)
        if debug:
            print(f"    [eig] it {it}: lam={lam!r} sigma={sigma!r}")
        scale = max(abs(lam), 1e-30)
        if lam < sigma:
            # a Ritz value below the shift proves the shift crossed the
            # spectrum even though the solves stayed inconspicuous
            sigma = _retreat_shift(sigma, history, fails)
            fails += 1
            if debug:
                print(f"    [eig] it {it}: ritz below shift, retreat to "
                      f"sigma={sigma!r}")
            prec = None
            continue
        fails = 0
        if len(history) >= 3 and \
                abs(history[-1] - history[-2]) <= tol * scale and \
                abs(history[-2] - history[-3]) <= tol * scale:
            return lam, X[:, 0]
        if len(history) >= 6 and \
                max(history[-5:]) - min(history[-5:]) <= 10 * tol * scale:
            # the sequence is rattling at solver-noise level
            return min(history[-5:]), X[:, 0]
        prop = _aitken_shift(history)
        if prop is None and it - last_shift_it >= 8 and len(history) >= 6:
            # the extrapolation gates stall near convergence; place the
            # shift a few spreads below the current value instead
            spread = max(max(history[-5:]) - min(history[-5:]), tol * scale)
            prop = lam - 8.0 * spread
        if prop is not None and prop - sigma > 0.1 * max(lam - sigma, 0.0):
            # certify the candidate with a Lanczos indefiniteness probe,
            # widening the safety margin until the probe passes
            cand = min(prop, lam * (1.0 - 1e-12))
            start = X[:, 0] + 1e-3 * rng.standard_normal(n)
            for _ in range(4):
                if cand <= sigma:
                    break
                if not probe_indefinite(cand, start):
                    sigma = cand
                    last_shift_it = it
                    break
                cand = lam - 2.0 * (lam - cand)
    raise SolverError(f"inverse iteration stagnated after {max_outer} steps "
                      f"(last lambda {history[-1] if history else None})")


def _retreat_shift(sigma, history, fails):
    """Move the shift decisively below a value proven to cross the spectrum.

    The retreat doubles with consecutive failures so a badly placed
    shift cannot pin the iteration.
    """
    anchor = min(sigma, history[-1]) if history else sigma
    base = max(abs(history[-1] - sigma) if history else abs(sigma),
               1e-6 * max(abs(anchor), 1.0))
    return max(0.0, anchor - 2.0 ** (fails + 1) * base)


def _lanczos_indefinite(A, start, deflate, steps: int = 100,
                        drop: float = -1e-10) -> bool:
    """Heuristic indefiniteness certificate via plain Lanczos.

    Runs a short Lanczos recursion on A and checks whether the smallest
    Ritz value of the tridiagonal dips below a tiny negative threshold
    relative to the matrix scale.
    """
    from scipy.linalg import eigh_tridiagonal

    v = np.asarray(start, dtype=float).copy()
    if deflate is not None:
        v = deflate(v)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return False
    v /= nv
    v_prev = np.zeros_like(v)
    beta = 0.0
    alphas, betas = [], []
    scale = abs(A.diagonal()).max() + 1e-300
    for _ in range(min(steps, A.shape[0])):
        w = A @ v
        if deflate is not None:
            w = deflate(w)
        alpha = v @ w
        w = w - alpha * v - beta * v_prev
        alphas.append(alpha)
        if len(alphas) >= 2:
            ev = eigh_tridiagonal(np.array(alphas), np.array(betas),
                                  eigvals_only=True, select="i",
                                  select_range=(0, 0))
            if ev[0] < drop * scale:
                return True
        elif alpha < drop * scale:
            return True
        beta = np.linalg.norm(w)
        if beta < 1e-14 * scale:
            break
        betas.append(beta)
        v_prev = v
        v = w / beta
    return False


def _aitken_shift(history):
    """Shift just below the extrapolated limit of the Ritz sequence.

    Returns None unless the last steps decay geometrically toward a
    limit; shifting on anything less drives the iteration toward
    interior eigenvalues.
    """
    if len(history) < 4:
        return None
    lam = history[-1]
    d1 = history[-1] - history[-2]
    d2 = history[-2] - history[-3]
    d3 = history[-3] - history[-4]
    if not (d1 < 0 and d2 < 0 and d3 < 0):
        return None
    rho1 = d1 / d2
    rho2 = d2 / d3
    if not (0.02 < rho1 < 0.9999 and 0.02 < rho2 < 0.9999):
        return None
    if abs(rho1 - rho2) > 0.3 * max(rho1, rho2):
        return None
    est = lam + d1 * rho1 / (1.0 - rho1)  # geometric-series limit
    if not np.isfinite(est) or est > lam:
        return None
    # a full remaining distance below the estimate: extrapolation error is
    # routinely a fraction of that distance, and overshooting costs a
    # refactorization
    return max(est - max(lam - est, 1e-30 * abs(lam)), 0.0)


def _d_orthonormalize(X, Dmat, rng, deflate, tiny: float = 1e-13):
    """Modified Gram-Schmidt in the D inner product."""
    n, b = X.shape
    DX = np.empty_like(X)
    for j in range(b):
        v = X[:, j]
        for k in range(j):
            v = v - (DX[:, k] @ v) * X[:, k]
        Dv = Dmat @ v
        nv = np.sqrt(max(v @ Dv, 0.0))
        if nv < tiny * max(1.0, np.linalg.norm(v)):
            v = rng.standard_normal(n)
            if deflate is not None:
                v = deflate(v)
            for k in range(j):
                v = v - (DX[:, k] @ v) * X[:, k]
            Dv = Dmat @ v
            nv = np.sqrt(max(v @ Dv, 1e-300))
        X[:, j] = v / nv
        DX[:, j] = Dv / nv
    return X


def estimate_constant(kind: str, n: int, params: IsotropicParams | None = None,
                      constrained: bool = True, level: int = 0,
                      threads: int = 1, tol: float = 1e-10) -> ConstantEstimate:
    mesh = build_box_mesh(n)
    spaces = build_spaces(mesh, constrained=constrained)
    N, D = assemble_pencil(kind, spaces, params=params, threads=threads)
    deflate = None
    regularizer = None
    if kind == "DevCurl" and N.dimension >= DENSE_LIMIT:
        from scipy.sparse import identity

        deflate = _gradient_deflator(spaces)
        rho = 1e-3 * float(np.mean(N.matrix.diagonal()))
        regularizer = rho * identity(N.dimension, format="csr")
    lam, _ = smallest_eigenvalue(N, D, tol=tol, deflate=deflate,
                                 regularizer=regularizer)
    constant = float("inf") if lam <= 0 else lam ** -0.5
    return ConstantEstimate(kind=kind, lambda_min=lam, constant=constant,
                            level=level, dofs=N.dimension, h=mesh_size(mesh))


def monotonicity_study(kind: str, ns=(2, 4, 8),
                       params: IsotropicParams | None = None,
                       constrained: bool = True, threads: int = 1) -> list:
    """Constant estimates over nested meshes; lambda_min must not increase."""
    return [estimate_constant(kind, n, params=params, constrained=constrained,
                              level=lv, threads=threads)
            for lv, n in enumerate(ns)]


def study_to_csv(estimates) -> str:
    lines = ["spec,level,dofs,lambda_min,constant"]
    for e in estimates:
        lines.append(f"{e.kind},{e.level},{e.dofs},{e.lambda_min:.12g},"
                     f"{e.constant:.12g}")
    return "\n".join(lines) + "\n"
