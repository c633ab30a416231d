"""Isotropic parameter sets, admissibility checks, constitutive maps and
spectral bounds of the fourth-order constitutive tensors.

The force-stress map carries an optional Cosserat couple modulus mu_c;
with mu_c = 0 it reduces to the symmetric-stress law of the relaxed
model.  The moment-stress law acts on the value of Curl P (not on the
dislocation density alpha = -Curl P); callers working with alpha handle
the sign.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensors import IDENTITY, as_mat3, dev_sym, frobenius, skew, sym

#: Orthonormal basis of Mat3 used for quadratic-form matrices: first the
#: six symmetric directions, then the three skew ones.  Eigenvalues of
#: forms expressed in this basis equal the material moduli directly.
_E = np.eye(3)


def _mat3_basis():
    basis = []
    for i in range(3):
        b = np.zeros((3, 3))
        b[i, i] = 1.0
        basis.append(b)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        b = np.zeros((3, 3))
        b[i, j] = b[j, i] = 1.0 / np.sqrt(2.0)
        basis.append(b)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        b = np.zeros((3, 3))
        b[i, j] = 1.0 / np.sqrt(2.0)
        b[j, i] = -1.0 / np.sqrt(2.0)
        basis.append(b)
    return basis


MAT3_BASIS = _mat3_basis()
SYM3_BASIS = MAT3_BASIS[:6]


@dataclass(frozen=True)
class IsotropicParams:
    """The seven moduli of the isotropic relaxed model plus mu_c.

    mu_e, lambda_e, mu_h, lambda_h carry stress units; a1, a2, a3 are
    the curvature moduli (units force); mu_c is the Cosserat couple
    modulus (stress units, default 0).
    """

    mu_e: float
    lambda_e: float
    mu_c: float
    mu_h: float
    lambda_h: float
    a1: float
    a2: float
    a3: float

    @property
    def nu_defined(self) -> bool:
        return self.lambda_e + self.mu_e != 0.0

    @property
    def nu(self) -> float:
        """Poisson ratio lambda_e / (2 (lambda_e + mu_e))."""
        if not self.nu_defined:
            raise ValueError("Poisson ratio undefined: lambda_e + mu_e = 0")
        return self.lambda_e / (2.0 * (self.lambda_e + self.mu_e))


@dataclass(frozen=True)
class ParamReport:
    valid: bool
    regime: str  # "relaxed_strict" | "gauge_semidefinite" | "invalid"
    violated: tuple = ()
    bounds: dict = field(default_factory=dict)


def _iso_bounds(p: IsotropicParams, which: str):
    if which == "C":
        return (min(2 * p.mu_e, 2 * p.mu_e + 3 * p.lambda_e),
                max(2 * p.mu_e, 2 * p.mu_e + 3 * p.lambda_e))
    if which == "H":
        return (min(2 * p.mu_h, 2 * p.mu_h + 3 * p.lambda_h),
                max(2 * p.mu_h, 2 * p.mu_h + 3 * p.lambda_h))
    if which == "Lc":
        return (min(p.a1, p.a2, 3 * p.a3), max(p.a1, p.a2, 3 * p.a3))
    raise ValueError(which)


def validate_relaxed(p: IsotropicParams) -> ParamReport:
    """Strict positive-definiteness conditions of the relaxed model.

    mu_c >= 0 is allowed on top of the seven strict inequalities.
    """
    checks = [
        ("mu_e > 0", p.mu_e > 0),
        ("2*mu_e + 3*lambda_e > 0", 2 * p.mu_e + 3 * p.lambda_e > 0),
        ("mu_h > 0", p.mu_h > 0),
        ("2*mu_h + 3*lambda_h > 0", 2 * p.mu_h + 3 * p.lambda_h > 0),
        ("a1 > 0", p.a1 > 0),
        ("a2 > 0", p.a2 > 0),
        ("a3 > 0", p.a3 > 0),
        ("mu_c >= 0", p.mu_c >= 0),
    ]
    violated = tuple(name for name, ok in checks if not ok)
    valid = not violated
    bounds = {"C": _iso_bounds(p, "C"), "H": _iso_bounds(p, "H"),
              "Lc": _iso_bounds(p, "Lc")}
    return ParamReport(valid=valid,
                       regime="relaxed_strict" if valid else "invalid",
                       violated=violated, bounds=bounds)


def validate_gauge(p: IsotropicParams) -> ParamReport:
    """Semidefiniteness conditions of the dislocation gauge theory.

    mu_h and lambda_h do not enter: the gauge energy has no microstress
    term.
    """
    checks = [
        ("mu_e >= 0", p.mu_e >= 0),
        ("2*mu_e + 3*lambda_e >= 0", 2 * p.mu_e + 3 * p.lambda_e >= 0),
        ("mu_c >= 0", p.mu_c >= 0),
        ("a1 >= 0", p.a1 >= 0),
        ("a2 >= 0", p.a2 >= 0),
        ("a3 >= 0", p.a3 >= 0),
    ]
    violated = tuple(name for name, ok in checks if not ok)
    valid = not violated
    bounds = {"C": _iso_bounds(p, "C"), "Lc": _iso_bounds(p, "Lc")}
    return ParamReport(valid=valid,
                       regime="gauge_semidefinite" if valid else "invalid",
                       violated=violated, bounds=bounds)


# ---------------------------------------------------------------------------
# isotropic constitutive maps
# ---------------------------------------------------------------------------

def sigma_iso(e, p: IsotropicParams) -> np.ndarray:
    """Force stress 2 mu_e sym e + 2 mu_c skew e + lambda_e tr(e) I."""
    e = as_mat3(e)
    return (2 * p.mu_e * sym(e) + 2 * p.mu_c * skew(e)
            + p.lambda_e * np.trace(e) * IDENTITY)


def microstress_s(P, p: IsotropicParams) -> np.ndarray:
    """Microstress 2 mu_h sym P + lambda_h tr(P) I (always symmetric)."""
    P = as_mat3(P)
    return 2 * p.mu_h * sym(P) + p.lambda_h * np.trace(P) * IDENTITY


def moment_m(curl_p, p: IsotropicParams) -> np.ndarray:
    """Moment stress a1 dev sym X + a2 skew X + a3 tr(X) I on X = Curl P."""
    x = as_mat3(curl_p)
    return (p.a1 * dev_sym(x) + p.a2 * skew(x)
            + p.a3 * np.trace(x) * IDENTITY)


def inverse_strain_from_stress(sigma_hat, p: IsotropicParams) -> np.ndarray:
    """Invert the force-stress law: recover e from sigma_hat.

    Requires mu_c > 0; for mu_c = 0 the law only determines sym e and is
    not invertible.
    """
    if p.mu_c <= 0:
        raise ValueError("force-stress law not invertible for mu_c = 0")
    if p.mu_e <= 0:
        raise ValueError("mu_e must be positive")
    nu = p.nu  # raises when undefined
    if nu == -1.0:
        raise ValueError("1 + nu = 0: trace term undefined")
    s = as_mat3(sigma_hat)
    return ((p.mu_c + p.mu_e) / (4 * p.mu_e * p.mu_c) * s
            + (p.mu_c - p.mu_e) / (4 * p.mu_e * p.mu_c) * s.T
            - nu / (2 * p.mu_e * (1 + nu)) * np.trace(s) * IDENTITY)


# ---------------------------------------------------------------------------
# fourth-order tensors
# ---------------------------------------------------------------------------

def apply_fourth_order(T, X) -> np.ndarray:
    """Double contraction (T.X)_ij = T_ijkl X_kl."""
    T = np.asarray(T, dtype=float)
    if T.shape != (3, 3, 3, 3):
        raise ValueError(f"expected 3x3x3x3, got {T.shape}")
    return np.tensordot(T, as_mat3(X), axes=2)


def _tensor_from_map(fn) -> np.ndarray:
    T = np.zeros((3, 3, 3, 3))
    for k in range(3):
        for l in range(3):
            E = np.zeros((3, 3))
            E[k, l] = 1.0
            T[:, :, k, l] = fn(E)
    return T


def _qform_matrix(T, basis):
    n = len(basis)
    M = np.empty((n, n))
    for a, Ea in enumerate(basis):
        TEa = apply_fourth_order(T, Ea)
        for b, Eb in enumerate(basis):
            M[a, b] = frobenius(TEa, Eb)
    return M


def eigen_bounds(T, domain: str = "Full9"):
    """Extreme eigenvalues of X -> <T.X, X> on Sym3 or Full9.

    The quadratic form is expressed in an orthonormal basis of the
    domain, so eigenvalues equal the material moduli directly.
    """
    if domain == "Sym3":
        basis = SYM3_BASIS
    elif domain == "Full9":
        basis = MAT3_BASIS
    else:
        raise ValueError("domain must be 'Sym3' or 'Full9'")
    M = _qform_matrix(T, basis)
    scale = np.max(np.abs(M))
    if scale > 0 and np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise ValueError("quadratic form is not symmetric on the domain")
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(ev[0]), float(ev[-1])


@dataclass(frozen=True)
class AnisoTensors:
    """Constitutive tensors for the assembly layer.

    C is the full force-stress map (it may carry a skew response and
    then has major symmetry only, as in the gauge theory); H has minor
    and major symmetries; Lc has major symmetry; B is the optional
    distortion/dislocation coupling of the gauge theory (default zero,
    major-symmetric against its transpose by construction of the form).
    """

    C: np.ndarray
    H: np.ndarray
    Lc: np.ndarray
    B: np.ndarray = None

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        H = np.asarray(self.H, dtype=float)
        Lc = np.asarray(self.Lc, dtype=float)
        B = np.zeros((3, 3, 3, 3)) if self.B is None else np.asarray(self.B, dtype=float)
        for name, T in (("C", C), ("H", H), ("Lc", Lc), ("B", B)):
            if T.shape != (3, 3, 3, 3):
                raise ValueError(f"{name} must be 3x3x3x3")
        tol = 1e-13

        def _rel(x, s):
            return x if s == 0 else x / s

        for name, T in (("C", C), ("H", H), ("Lc", Lc)):
            s = np.max(np.abs(T))
            if _rel(np.max(np.abs(T - np.transpose(T, (2, 3, 0, 1)))), s) > tol:
                raise ValueError(f"{name} violates major symmetry")
        sH = np.max(np.abs(H))
        if _rel(np.max(np.abs(H - np.transpose(H, (1, 0, 2, 3)))), sH) > tol:
            raise ValueError("H violates minor symmetry")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Lc", Lc)
        object.__setattr__(self, "B", B)

    @property
    def c_has_minor_symmetry(self) -> bool:
        s = np.max(np.abs(self.C))
        if s == 0:
            return True
        return np.max(np.abs(self.C - np.transpose(self.C, (1, 0, 2, 3)))) <= 1e-13 * s


def iso_to_tensors(p: IsotropicParams) -> AnisoTensors:
    """Fourth-order realizations of the isotropic laws.

    C realizes the force-stress map (including the mu_c skew response),
    H the microstress map and Lc the moment-stress map; B is zero.
    """
    C = _tensor_from_map(lambda X: sigma_iso(X, p))
    H = _tensor_from_map(lambda X: microstress_s(X, p))
    Lc = _tensor_from_map(lambda X: moment_m(X, p))
    return AnisoTensors(C=C, H=H, Lc=Lc)


# ---------------------------------------------------------------------------
# special-case parameter factories
# ---------------------------------------------------------------------------

SPECIAL_CASES = ("Edelen", "PopovKroener", "Einstein", "StrainGradient")


def special_case_params(case: str, a1: float, p_base: IsotropicParams,
                        d: float | None = None) -> IsotropicParams:
    """Parameter sets of the named gauge-theory special cases.

    All cases force mu_c = 0.  For PopovKroener the curvature moduli
    are derived from the mesoscopic length d and the a1 argument is
    ignored.
    """
    mu_e, lam_e = p_base.mu_e, p_base.lambda_e
    if case == "Edelen":
        vals = (a1, a1, a1 / 3.0)
    elif case == "PopovKroener":
        if d is None or d <= 0:
            raise ValueError("PopovKroener requires a mesoscopic length d > 0")
        nu = p_base.nu
        if nu == 1.0:
            raise ValueError("PopovKroener undefined for nu = 1")
        a1_pk = 3.0 * mu_e * (2 * d) ** 2 / 24.0
        a2_pk = mu_e * (2 * d) ** 2 / 24.0 * (3 + nu) / (1 - nu)
        vals = (a1_pk, a2_pk, 0.0)
    elif case == "Einstein":
        vals = (a1, -a1, -a1 / 6.0)
    elif case == "StrainGradient":
        nu = p_base.nu
        if nu == 1.0:
            raise ValueError("StrainGradient undefined for nu = 1")
        vals = (a1, a1 * (1 + nu) / (1 - nu), -a1 / 6.0)
    else:
        raise ValueError(f"unknown special case {case!r}; choose from {SPECIAL_CASES}")
    return IsotropicParams(mu_e=mu_e, lambda_e=lam_e, mu_c=0.0,
                           mu_h=p_base.mu_h, lambda_h=p_base.lambda_h,
                           a1=vals[0], a2=vals[1], a3=vals[2])
