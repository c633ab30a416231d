"""Exact 3x3 tensor algebra: inner products, Cartan split, Nye maps,
irreducible dislocation pieces and screw/edge classification.

All operations are pure functions on dense (3, 3) float arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY = np.eye(3)

# Levi-Civita symbol, used across the package.
LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k, _s in ((0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
                       (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0)):
    LEVI_CIVITA[_i, _j, _k] = _s


def as_mat3(x) -> np.ndarray:
    m = np.asarray(x, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 array, got shape {m.shape}")
    return m


def frobenius(x, y) -> float:
    """Frobenius inner product tr(X Y^T)."""
    return float(np.tensordot(as_mat3(x), as_mat3(y)))


def frobenius_norm(x) -> float:
    return float(np.linalg.norm(as_mat3(x)))


def sym(x) -> np.ndarray:
    x = as_mat3(x)
    return 0.5 * (x + x.T)


def skew(x) -> np.ndarray:
    x = as_mat3(x)
    return 0.5 * (x - x.T)


def dev(x) -> np.ndarray:
    x = as_mat3(x)
    return x - np.trace(x) / 3.0 * IDENTITY


def spherical(x) -> np.ndarray:
    return np.trace(as_mat3(x)) / 3.0 * IDENTITY


def dev_sym(x) -> np.ndarray:
    return dev(sym(x))


@dataclass(frozen=True)
class CartanParts:
    """Orthogonal split of a 3x3 matrix into trace-free symmetric, skew
    and spherical parts.  The three parts sum back to the input and are
    pairwise orthogonal under the Frobenius product."""

    devsym: np.ndarray
    skew: np.ndarray
    spherical: np.ndarray

    def recompose(self) -> np.ndarray:
        return self.devsym + self.skew + self.spherical


def cartan_decompose(x) -> CartanParts:
    x = as_mat3(x)
    return CartanParts(devsym=dev_sym(x), skew=skew(x), spherical=spherical(x))


def nye_from_alpha(alpha) -> np.ndarray:
    """Nye tensor kappa = alpha^T - (1/2) tr(alpha) I."""
    a = as_mat3(alpha)
    return a.T - 0.5 * np.trace(a) * IDENTITY


def alpha_from_nye(kappa) -> np.ndarray:
    """Inverse Nye map alpha = kappa^T - tr(kappa) I."""
    k = as_mat3(kappa)
    return k.T - np.trace(k) * IDENTITY


@dataclass(frozen=True)
class IrreducibleDislocation:
    """SO(3)-irreducible pieces of a dislocation density tensor.

    tentor:  trace-free symmetric part (single screw + symmetric edge content)
    trator:  antisymmetric part (skew edge content)
    axitor:  spherical part (sum of screw dislocations)
    """

    tentor: np.ndarray
    trator: np.ndarray
    axitor: np.ndarray

    def recompose(self) -> np.ndarray:
        return self.tentor + self.trator + self.axitor


def irreducible_split(alpha) -> IrreducibleDislocation:
    parts = cartan_decompose(alpha)
    return IrreducibleDislocation(tentor=parts.devsym, trator=parts.skew,
                                  axitor=parts.spherical)


def classify_dislocation(alpha, tol: float = 1e-12) -> str:
    """Classify a dislocation density by its sparsity pattern.

    Diagonal entries carry screw content, off-diagonal entries edge
    content.  Returns one of "none", "screw", "edge", "mixed".
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    a = as_mat3(alpha)
    diag = np.max(np.abs(np.diag(a)))
    off = np.max(np.abs(a - np.diag(np.diag(a))))
    has_screw = diag > tol
    has_edge = off > tol
    if not has_screw and not has_edge:
        return "none"
    if has_screw and not has_edge:
        return "screw"
    if has_edge and not has_screw:
        return "edge"
    return "mixed"
