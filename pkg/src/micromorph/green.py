"""Closed-form gauge-theory analytics: characteristic lengths, the Green
tensor of the force-stress equation, the box operator as a
finite-difference oracle, and point-source superposition.

The published closed form of the Green tensor solves the point-source
problem only modulo terms that vanish for self-equilibrated sources
(Div sigma0 = 0, the standing solvability constraint).  Evaluated on a
raw point stress those omitted terms leave a nonzero residual, so this
module also carries the exact completion: four additional structures
whose radial profiles are plain Yukawa kernels derived from the Fourier
symbol of the field equation.  `green_tensor` returns the completed
(exact) fundamental solution by default; `completion=False` yields the
published five-term kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constitutive import IsotropicParams
from .tensors import as_mat3

_I = np.eye(3)


# ---------------------------------------------------------------------------
# characteristic lengths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CharacteristicLengths:
    """Squared material lengths; None marks a formally undefined length
    (mu_c = 0 for l3/l4, undefined Poisson ratio for l2).  A defined
    negative square is flagged imaginary rather than rejected."""

    l1_sq: float | None
    l2_sq: float | None
    l3_sq: float | None
    l4_sq: float | None

    def defined(self, k: int) -> bool:
        return getattr(self, f"l{k}_sq") is not None

    def imaginary(self, k: int) -> bool:
        v = getattr(self, f"l{k}_sq")
        return v is not None and v < 0.0

    def values(self):
        return (self.l1_sq, self.l2_sq, self.l3_sq, self.l4_sq)


def lengths(p: IsotropicParams) -> CharacteristicLengths:
    """l1^2 = a1/(2 mu_e) and friends; l3, l4 need mu_c > 0."""
    if p.mu_e <= 0:
        raise ValueError("characteristic lengths need mu_e > 0")
    l1 = p.a1 / (2 * p.mu_e)
    l2 = None
    if p.nu_defined:
        nu = p.nu
        if 1 + nu != 0:
            l2 = (1 - nu) * p.a2 / (2 * p.mu_e * (1 + nu))
    if p.mu_c > 0:
        l3 = (p.mu_e + p.mu_c) * (p.a1 + p.a2) / (8 * p.mu_e * p.mu_c)
        l4 = (p.a1 + 6 * p.a3) / (6 * p.mu_c)
    else:
        l3 = l4 = None
    return CharacteristicLengths(l1, l2, l3, l4)


@dataclass(frozen=True)
class LengthLimitReport:
    direction: str
    l3_sq: float | None
    l4_sq: float | None
    divergent: bool


def lengths_limit_mu_c(p: IsotropicParams, direction: str) -> LengthLimitReport:
    """Limits of the mu_c-dependent lengths.

    For mu_c -> infinity only the bending length survives:
    l3^2 -> (a1+a2)/(8 mu_e) and l4^2 -> 0.  For mu_c -> 0 both diverge.
    """
    if p.mu_e <= 0:
        raise ValueError("mu_e must be positive")
    if direction == "to_infinity":
        return LengthLimitReport(direction, (p.a1 + p.a2) / (8 * p.mu_e), 0.0,
                                 divergent=False)
    if direction == "to_zero":
        return LengthLimitReport(direction, None, None, divergent=True)
    raise ValueError("direction must be 'to_infinity' or 'to_zero'")


def special_case_lengths(case: str, a1: float, p_base: IsotropicParams,
                         d: float | None = None) -> CharacteristicLengths:
    """Per-case closed forms of the length tables.

    All four gauge special cases have mu_c = 0; the Einstein case keeps
    the stated degenerate values l3^2 = l4^2 = 0, the others leave l3
    and l4 undefined.
    """
    mu_e = p_base.mu_e
    if mu_e <= 0:
        raise ValueError("mu_e must be positive")
    nu = p_base.nu
    if case == "Edelen":
        return CharacteristicLengths(a1 / (2 * mu_e),
                                     (1 - nu) * a1 / (2 * mu_e * (1 + nu)),
                                     None, None)
    if case == "PopovKroener":
        if d is None or d <= 0:
            raise ValueError("PopovKroener requires d > 0")
        a1_pk = 3.0 * mu_e * (2 * d) ** 2 / 24.0
        return CharacteristicLengths(a1_pk / (2 * mu_e),
                                     (3 + nu) * a1_pk / (6 * mu_e * (1 + nu)),
                                     None, None)
    if case == "Einstein":
        return CharacteristicLengths(a1 / (2 * mu_e),
                                     -(1 - nu) * a1 / (2 * mu_e * (1 + nu)),
                                     0.0, 0.0)
    if case == "StrainGradient":
        return CharacteristicLengths(a1 / (2 * mu_e), a1 / (2 * mu_e),
                                     None, None)
    raise ValueError(f"unknown special case {case!r}")


# ---------------------------------------------------------------------------
# Green tensor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GreenCoeffs:
    c1: float
    c2: float
    c3: float


def green_coeffs(p: IsotropicParams) -> GreenCoeffs:
    """c1 = (2a1+3a3)/3, c2 = (3a3-a1)/3, c3 = (a2-a1)/2."""
    return GreenCoeffs(c1=(2 * p.a1 + 3 * p.a3) / 3.0,
                       c2=(3 * p.a3 - p.a1) / 3.0,
                       c3=(p.a2 - p.a1) / 2.0)


def _yukawa_derivs(r: float, m: float, order: int = 4):
    """Derivatives 0..order of e^(-m r)/r."""
    e = math.exp(-m * r)
    out = []
    for n in range(order + 1):
        s = sum(math.factorial(n) // math.factorial(n - k) * m ** (n - k)
                / r ** (k + 1) for k in range(n + 1))
        out.append((-1) ** n * e * s)
    return np.array(out)


def _hessian_radial(x, f1, f2):
    r = np.linalg.norm(x)
    return (_I / r - np.outer(x, x) / r ** 3) * f1 + np.outer(x, x) / r ** 2 * f2


def _fourth_radial(x, f):
    """d_i d_j d_k d_l of a radial function from its derivatives f[1..4]."""
    r = np.linalg.norm(x)
    g2 = f[2] / r ** 2 - f[1] / r ** 3
    g3 = f[3] / r ** 3 - 3 * f[2] / r ** 4 + 3 * f[1] / r ** 5
    g4 = (f[4] / r ** 3 - 6 * f[3] / r ** 4 + 15 * f[2] / r ** 5
          - 15 * f[1] / r ** 6) / r
    T = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    dd = _I[i, j] * _I[k, l] + _I[i, k] * _I[j, l] + _I[i, l] * _I[j, k]
                    xx = (_I[i, j] * x[k] * x[l] + _I[i, k] * x[j] * x[l]
                          + _I[j, k] * x[i] * x[l] + _I[i, l] * x[j] * x[k]
                          + _I[j, l] * x[i] * x[k] + _I[k, l] * x[i] * x[j])
                    T[i, j, k, l] = dd * g2 + xx * g3 + x[i] * x[j] * x[k] * x[l] * g4
    return T


def _length_roots(p: IsotropicParams, allow_zero_mu_c: bool):
    ls = lengths(p)
    if ls.l2_sq is None:
        raise ValueError("Green tensor needs a defined Poisson ratio")
    for k in (1, 2):
        if ls.imaginary(k):
            raise ValueError(f"length l{k} is imaginary for these parameters; "
                             "the Green tensor is not defined")
        if getattr(ls, f"l{k}_sq") == 0.0:
            raise ValueError(f"length l{k} vanishes; Green tensor undefined")
    if not allow_zero_mu_c:
        if p.mu_c <= 0:
            raise ValueError("Green tensor needs mu_c > 0; "
                             "use green_tensor_mu_c_limit for the mu_c -> 0 case")
        for k in (3, 4):
            if ls.imaginary(k) or getattr(ls, f"l{k}_sq") == 0.0:
                raise ValueError(f"length l{k} must be real positive")
    return ls


def _check_radius(x, scale):
    r = float(np.linalg.norm(x))
    if r <= 1e-12 * scale:
        raise ValueError("evaluation point coincides with the source")
    return r


def green_tensor(x, p: IsotropicParams, completion: bool = True) -> np.ndarray:
    """Force-stress response G(x) to a unit point stress (mu_c > 0).

    With completion=True (default) the result is the exact fundamental
    solution; completion=False evaluates only the published five-term
    kernel, which is exact for superpositions of divergence-free
    sources.
    """
    ls = _length_roots(p, allow_zero_mu_c=False)
    l1s, l2s, l3s, l4s = ls.values()
    x = np.asarray(x, dtype=float)
    r = _check_radius(x, math.sqrt(max(l1s, l2s, l3s, l4s)))

    d1 = _yukawa_derivs(r, 1 / math.sqrt(l1s))
    d2 = _yukawa_derivs(r, 1 / math.sqrt(l2s))
    d3 = _yukawa_derivs(r, 1 / math.sqrt(l3s))
    d4 = _yukawa_derivs(r, 1 / math.sqrt(l4s))

    G = _paper_terms(x, r, l1s, l4s, d1, d2, d3, d4)
    if completion:
        G += _completion_terms(x, p, d1, d2, d3, d4)
    return G


def green_tensor_mu_c_limit(x, p: IsotropicParams,
                            completion: bool = True) -> np.ndarray:
    """The mu_c -> 0 limit kernel (symmetric-force-stress models).

    The l3 and l4 exponentials degenerate to harmonic 1/r profiles; the
    published limit form keeps three terms, and the completion limits
    acquire long-range pieces.
    """
    ls = _length_roots(p, allow_zero_mu_c=True)
    l1s, l2s = ls.l1_sq, ls.l2_sq
    x = np.asarray(x, dtype=float)
    r = _check_radius(x, math.sqrt(max(l1s, l2s)))

    d1 = _yukawa_derivs(r, 1 / math.sqrt(l1s))
    d2 = _yukawa_derivs(r, 1 / math.sqrt(l2s))
    d0 = _yukawa_derivs(r, 0.0)  # 1/r and derivatives

    H12 = _hessian_radial(x, d1[1] - d2[1], d1[2] - d2[2])
    L12 = (d1[2] - d2[2]) + 2 * (d1[1] - d2[1]) / r
    H10 = _hessian_radial(x, d1[1] - d0[1], d1[2] - d0[2])

    G = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    v = (_I[i, k] * _I[j, l] + _I[i, l] * _I[j, k]) * d1[0] / l1s
                    v -= (_I[i, j] * L12 - H12[i, j]) * _I[k, l]
                    v -= (_I[j, l] * H10[i, k] + _I[i, l] * H10[j, k])
                    G[i, j, k, l] = v / (8 * math.pi)
    if completion:
        # limits of the completion profiles: kappa -> -1, s3, s4 -> 1/r
        f7 = 0.5 * d1 + 0.5 * d0
        f9 = 0.5 * d1 + 0.5 * d0
        f10 = (p.a1 * d1 + p.a2 * d2 - (p.a1 + p.a2) * d0) / (4 * p.mu_e)
        G += _assemble_completion(x, p, f7, f9, f10, d1, d2)
    return G


def _paper_terms(x, r, l1s, l4s, d1, d2, d3, d4):
    H12 = _hessian_radial(x, d1[1] - d2[1], d1[2] - d2[2])
    H13 = _hessian_radial(x, d1[1] - d3[1], d1[2] - d3[2])
    H43 = _hessian_radial(x, d4[1] - d3[1], d4[2] - d3[2])
    L12 = (d1[2] - d2[2]) + 2 * (d1[1] - d2[1]) / r
    G = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    v = (_I[i, k] * _I[j, l] + _I[i, l] * _I[j, k]) * d1[0] / l1s
                    v += (_I[i, k] * _I[j, l] - _I[i, l] * _I[j, k]) * d4[0] / l4s
                    v -= (_I[i, j] * L12 - H12[i, j]) * _I[k, l]
                    v -= (_I[j, l] * H13[i, k] + _I[i, l] * H13[j, k])
                    v -= (_I[j, l] * H43[i, k] - _I[i, l] * H43[j, k])
                    G[i, j, k, l] = v / (8 * math.pi)
    return G


def _completion_terms(x, p: IsotropicParams, d1, d2, d3, d4):
    kap = (p.mu_c - p.mu_e) / (p.mu_c + p.mu_e)
    f7 = 0.5 * d1 - kap * d3 - 0.5 * d4
    f9 = 0.5 * d1 + 0.5 * d4
    f10 = (p.a1 * d1 + p.a2 * d2 - (p.a1 + p.a2) * d3) / (4 * p.mu_e)
    return _assemble_completion(x, p, f7, f9, f10, d1, d2)


def _assemble_completion(x, p: IsotropicParams, f7, f9, f10, d1, d2):
    # trace-coupled profile: partial fractions of
    # (2 lam a1 a2 u + 2 mu_e (3 lam + 2 mu_e)(a2 - a1)) /
    #   (8 mu_e^2 (3 lam + 2 mu_e) (1 + l1s u)(1 + l2s u))
    lam_e, mu_e, a1v, a2v = p.lambda_e, p.mu_e, p.a1, p.a2
    l1s = a1v / (2 * mu_e)
    nu = p.nu
    l2s = (1 - nu) * a2v / (2 * mu_e * (1 + nu))
    alpha = 2 * lam_e * a1v * a2v
    beta = 2 * mu_e * (3 * lam_e + 2 * mu_e) * (a2v - a1v)
    den0 = 8 * mu_e ** 2 * (3 * lam_e + 2 * mu_e)
    u1, u2 = -1 / l1s, -1 / l2s
    A5 = (alpha * u1 + beta) / (1 + l2s * u1)
    B5 = (alpha * u2 + beta) / (1 + l1s * u2)
    f5 = (A5 / den0 / l1s) * d1 + (B5 / den0 / l2s) * d2

    H5 = _hessian_radial(x, f5[1], f5[2]) / (4 * math.pi)
    H7 = _hessian_radial(x, f7[1], f7[2]) / (4 * math.pi)
    H9 = _hessian_radial(x, f9[1], f9[2]) / (4 * math.pi)
    T10 = _fourth_radial(x, f10) / (4 * math.pi)

    G = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    G[i, j, k, l] = (T10[i, j, k, l]
                                     - _I[i, j] * H5[k, l]
                                     - _I[j, k] * H7[i, l]
                                     - _I[i, k] * H9[j, l])
    return G


# ---------------------------------------------------------------------------
# box operator by finite differences
# ---------------------------------------------------------------------------

def box_operator_fd(sigma_field, x, p: IsotropicParams, h: float) -> np.ndarray:
    """The component form of the stress operator, all second derivatives
    replaced by central differences of step h.

    Normalized so a constant field maps to itself; requires mu_c > 0 and
    a defined Poisson ratio.
    """
    if p.mu_c <= 0 or p.mu_e <= 0:
        raise ValueError("box operator needs mu_e > 0 and mu_c > 0")
    nu = p.nu
    cc = green_coeffs(p)
    c1, c2, c3 = cc.c1, cc.c2, cc.c3
    x = np.asarray(x, dtype=float)

    def d2(i, j):
        ei = np.zeros(3)
        ei[i] = h
        if i == j:
            return (np.asarray(sigma_field(x + ei)) - 2 * sig
                    + np.asarray(sigma_field(x - ei))) / h ** 2
        ej = np.zeros(3)
        ej[j] = h
        return (np.asarray(sigma_field(x + ei + ej)) - np.asarray(sigma_field(x + ei - ej))
                - np.asarray(sigma_field(x - ei + ej)) + np.asarray(sigma_field(x - ei - ej))) / (4 * h ** 2)

    sig = as_mat3(sigma_field(x))
    D = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(i, 3):
            Dij = d2(i, j)
            D[i, j] = Dij
            D[j, i] = Dij
    lap = D[0, 0] + D[1, 1] + D[2, 2]
    lap_tr = np.trace(lap)
    dd_tr = np.einsum("ijkk->ij", D)

    out = np.empty((3, 3))
    tcoef = (c1 - c2 + 2 * c3) * (2 * p.mu_c * nu) / (1 + nu) - 2 * c3 * p.mu_c
    for i in range(3):
        for j in range(3):
            v = tcoef * (_I[i, j] * lap_tr - dd_tr[i, j])
            v -= (c1 * (p.mu_c + p.mu_e) - c2 * (p.mu_c - p.mu_e)) * lap[i, j]
            v += ((c1 * (p.mu_c - p.mu_e) - c2 * (p.mu_c + p.mu_e))
                  * (sum(D[j, k, k, i] for k in range(3)) - lap[j, i]))
            v += ((2 * c2 * p.mu_e - c3 * (p.mu_c + p.mu_e))
                  * sum(D[i, k, k, j] for k in range(3)))
            v += 4 * p.mu_e * p.mu_c * sig[i, j]
            out[i, j] = v / (4 * p.mu_e * p.mu_c)
    return out


# ---------------------------------------------------------------------------
# superposition of point stresses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointStress:
    location: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, dtype=float))
        object.__setattr__(self, "L", as_mat3(self.L))


def superpose(sources, x, p: IsotropicParams, completion: bool = True) -> np.ndarray:
    """Force stress at x from a list of point stresses."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((3, 3))
    for s in sources:
        dx = x - s.location
        G = green_tensor(dx, p, completion=completion)
        out += np.tensordot(G, s.L, axes=2)
    return out
