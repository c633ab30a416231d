"""Manufactured exact solutions for the convergence studies.

The exact pair (u, P) is chosen to satisfy the homogeneous boundary
conditions on the unit box: u vanishes on the whole boundary and every
column j of P carries the classic tangential-zero profile (the j-th
component vanishes on the four faces to which e_j is tangential).

Loads are produced symbolically by applying the strong operators to the
exact fields and are lambdified once per parameter set.  Before any
study trusts them, `validate_loads` re-applies the strong operators by
nested finite differences of the primitive fields; symbolic and numeric
routes must agree to about 1e-8, far below the 1e-6 gate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .constitutive import IsotropicParams

_X, _Y, _Z = sp.symbols("x y z")
_XYZ = (_X, _Y, _Z)


def _curl_rows(M):
    C = sp.zeros(3, 3)
    for i in range(3):
        v = (M[i, 0], M[i, 1], M[i, 2])
        C[i, 0] = sp.diff(v[2], _Y) - sp.diff(v[1], _Z)
        C[i, 1] = sp.diff(v[0], _Z) - sp.diff(v[2], _X)
        C[i, 2] = sp.diff(v[1], _X) - sp.diff(v[0], _Y)
    return C


def _grad_rows(u):
    return sp.Matrix(3, 3, lambda i, j: sp.diff(u[i], _XYZ[j]))


def _div_rows(M):
    return sp.Matrix([sum(sp.diff(M[i, j], _XYZ[j]) for j in range(3))
                      for i in range(3)])


def _sym(M):
    return (M + M.T) / 2


def _skew(M):
    return (M - M.T) / 2


def _dev(M):
    return M - sp.trace(M) / 3 * sp.eye(3)


def _lambdify_vec(expr):
    f = sp.lambdify(_XYZ, list(expr), modules="numpy")
    return lambda x: np.asarray(f(*x), dtype=float)


def _lambdify_mat(expr):
    f = sp.lambdify(_XYZ, [[expr[i, j] for j in range(3)] for i in range(3)],
                    modules="numpy")
    return lambda x: np.asarray(f(*x), dtype=float)


@dataclass
class ManufacturedSolution:
    u: callable
    grad_u: callable
    P: callable
    curl_P: callable
    f: callable
    M: callable
    model: str


def trig_pair(params: IsotropicParams, model: str = "relaxed",
              amp_u=(0.3, -0.2, 0.1), amp_p=None) -> ManufacturedSolution:
    """Trigonometric exact pair on the unit box.

    u_i = amp_u_i sin(pi x) sin(pi y) sin(pi z);
    P_ij = amp_p_ij s_j with s_1 = cos(pi x) sin(pi y) sin(pi z) etc.,
    so each column satisfies the tangential-zero condition.
    """
    if amp_p is None:
        amp_p = np.array([[0.20, -0.10, 0.15],
                          [0.05, 0.25, -0.20],
                          [-0.15, 0.10, 0.30]])
    bubble = sp.sin(sp.pi * _X) * sp.sin(sp.pi * _Y) * sp.sin(sp.pi * _Z)
    u = sp.Matrix([a * bubble for a in amp_u])
    s = (sp.cos(sp.pi * _X) * sp.sin(sp.pi * _Y) * sp.sin(sp.pi * _Z),
         sp.sin(sp.pi * _X) * sp.cos(sp.pi * _Y) * sp.sin(sp.pi * _Z),
         sp.sin(sp.pi * _X) * sp.sin(sp.pi * _Y) * sp.cos(sp.pi * _Z))
    P = sp.Matrix(3, 3, lambda i, j: sp.Float(amp_p[i, j]) * s[j])
    return _build(u, P, params, model)


def _build(u, P, params: IsotropicParams, model: str) -> ManufacturedSolution:
    p = params
    gradu = _grad_rows(u)
    e = gradu - P
    curlP = _curl_rows(P)
    sigma = (2 * p.mu_e * _sym(e) + 2 * p.mu_c * _skew(e)
             + p.lambda_e * sp.trace(e) * sp.eye(3))
    if model == "relaxed":
        m = (p.a1 * _dev(_sym(curlP)) + p.a2 * _skew(curlP)
             + p.a3 * sp.trace(curlP) * sp.eye(3))
        s_micro = 2 * p.mu_h * _sym(P) + p.lambda_h * sp.trace(P) * sp.eye(3)
    elif model == "further_relaxed":
        m = p.a1 * _dev(_sym(curlP)) + p.a2 * _skew(curlP)
        s_micro = 2 * p.mu_h * _dev(_sym(P))
    else:
        raise ValueError("model must be 'relaxed' or 'further_relaxed'")
    # strong equations: 0 = Div sigma + f and 0 = -Curl m + sigma - s + M
    f = -_div_rows(sigma)
    M = _curl_rows(m) - sigma + s_micro
    return ManufacturedSolution(
        u=_lambdify_vec(u), grad_u=_lambdify_mat(gradu),
        P=_lambdify_mat(P), curl_P=_lambdify_mat(curlP),
        f=_lambdify_vec(sp.simplify(f)), M=_lambdify_mat(sp.simplify(M)),
        model=model)


# ---------------------------------------------------------------------------
# finite-difference strong-form oracle
# ---------------------------------------------------------------------------

def _fd_grad_vec(fn, x, h):
    out = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        out[:, j] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h)
    return out


def _fd_curl_rows(fn, x, h):
    out = np.empty((3, 3))
    d = np.empty((3, 3, 3))  # d[k] = d/dx_k of fn (3x3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        d[k] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h)
    for i in range(3):
        out[i, 0] = d[1][i, 2] - d[2][i, 1]
        out[i, 1] = d[2][i, 0] - d[0][i, 2]
        out[i, 2] = d[0][i, 1] - d[1][i, 0]
    return out


def _fd_div_rows(fn, x, h):
    out = np.zeros(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        out += (np.asarray(fn(x + e))[:, j] - np.asarray(fn(x - e))[:, j]) / (2 * h)
    return out


def _richardson(op, h):
    return (4.0 * op(h / 2) - op(h)) / 3.0


def strong_form_loads_fd(exact, params: IsotropicParams, x, model: str,
                         h: float = 1e-3):
    """Apply the strong operators to the primitive fields numerically.

    All derivatives are Richardson-extrapolated central differences of
    the u and P callables alone; the symbolic derivation never enters.
    """
    p = params

    def sigma_at(y):
        gu = _richardson(lambda hh: _fd_grad_vec(exact.u, y, hh), h)
        e = gu - exact.P(y)
        return (2 * p.mu_e * 0.5 * (e + e.T) + 2 * p.mu_c * 0.5 * (e - e.T)
                + p.lambda_e * np.trace(e) * np.eye(3))

    def m_at(y):
        cp = _richardson(lambda hh: _fd_curl_rows(exact.P, y, hh), h)
        symcp = 0.5 * (cp + cp.T)
        devsym = symcp - np.trace(symcp) / 3.0 * np.eye(3)
        skw = 0.5 * (cp - cp.T)
        if model == "relaxed":
            return p.a1 * devsym + p.a2 * skw + p.a3 * np.trace(cp) * np.eye(3)
        return p.a1 * devsym + p.a2 * skw

    def s_at(y):
        P = exact.P(y)
        symP = 0.5 * (P + P.T)
        if model == "relaxed":
            return 2 * p.mu_h * symP + p.lambda_h * np.trace(P) * np.eye(3)
        return 2 * p.mu_h * (symP - np.trace(symP) / 3.0 * np.eye(3))

    f = -_richardson(lambda hh: _fd_div_rows(sigma_at, x, hh), h)
    M = (_richardson(lambda hh: _fd_curl_rows(m_at, x, hh), h)
         - sigma_at(x) + s_at(x))
    return f, M


def validate_loads(exact, params: IsotropicParams, n_points: int = 100,
                   tol: float = 1e-6, seed: int = 3) -> float:
    """Largest relative mismatch between closed-form and FD loads."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    scale_f = max(np.linalg.norm(exact.f(np.full(3, 0.41))), 1.0)
    scale_m = max(np.linalg.norm(exact.M(np.full(3, 0.41))), 1.0)
    for _ in range(n_points):
        x = 0.15 + 0.7 * rng.random(3)
        f_fd, M_fd = strong_form_loads_fd(exact, params, x, exact.model)
        worst = max(worst,
                    np.max(np.abs(f_fd - exact.f(x))) / scale_f,
                    np.max(np.abs(M_fd - exact.M(x))) / scale_m)
    if worst > tol:
        raise ValueError(f"manufactured loads disagree with the FD strong-form "
                         f"oracle: mismatch {worst:.3e} > {tol:g}")
    return worst
