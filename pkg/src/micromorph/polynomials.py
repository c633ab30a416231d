"""A small exact polynomial calculus in three variables.

The symmetry statements of the dislocation module are algebraic
identities, so they are checked with exact differentiation of
polynomial fields instead of finite differences.  Coefficients are
plain floats; all operations (+, *, scale, diff, eval) are exact for
the degree-3 inputs the callers use.
"""
from __future__ import annotations

import numpy as np

MAX_DEGREE = 3


class Poly3:
    """Polynomial in (x, y, z) stored as {(i, j, k): coefficient}."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for mono, c in terms.items():
                if c != 0.0:
                    self.terms[tuple(mono)] = float(c)

    @classmethod
    def constant(cls, c):
        return cls({(0, 0, 0): c})

    @classmethod
    def monomial(cls, i, j, k, c=1.0):
        return cls({(i, j, k): c})

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Poly3(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly3({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) + (-self)

    def __mul__(self, other):
        if np.isscalar(other):
            return Poly3({m: c * other for m, c in self.terms.items()})
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = (m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2])
                out[m] = out.get(m, 0.0) + c1 * c2
        return Poly3(out)

    __rmul__ = __mul__

    def diff(self, axis: int) -> "Poly3":
        out = {}
        for m, c in self.terms.items():
            if m[axis] == 0:
                continue
            mm = list(m)
            mm[axis] -= 1
            out[tuple(mm)] = out.get(tuple(mm), 0.0) + c * m[axis]
        return Poly3(out)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c * x[0] ** m[0] * x[1] ** m[1] * x[2] ** m[2]
                   for m, c in self.terms.items())

    def __repr__(self):
        if not self.terms:
            return "Poly3(0)"
        parts = [f"{c:+g} x^{m[0]} y^{m[1]} z^{m[2]}" for m, c in sorted(self.terms.items())]
        return "Poly3(" + " ".join(parts) + ")"


def _as_poly(v):
    if isinstance(v, Poly3):
        return v
    if np.isscalar(v):
        return Poly3.constant(v)
    raise TypeError(f"cannot treat {type(v)} as a polynomial")


ZERO = Poly3()


class PolyMat3:
    """3x3 matrix with Poly3 entries."""

    def __init__(self, entries):
        self.entries = [[_as_poly(entries[i][j]) for j in range(3)] for i in range(3)]

    @classmethod
    def zeros(cls):
        return cls([[ZERO] * 3 for _ in range(3)])

    @classmethod
    def random(cls, rng, degree=3, scale=1.0):
        if degree > MAX_DEGREE:
            raise ValueError(f"degree above the supported maximum {MAX_DEGREE}")

        def rand_poly():
            terms = {}
            for i in range(degree + 1):
                for j in range(degree + 1 - i):
                    for k in range(degree + 1 - i - j):
                        terms[(i, j, k)] = scale * rng.standard_normal()
            return Poly3(terms)

        return cls([[rand_poly() for _ in range(3)] for _ in range(3)])

    def __getitem__(self, ij):
        return self.entries[ij[0]][ij[1]]

    def degree(self):
        return max(p.degree() for row in self.entries for p in row)

    def map(self, fn):
        return PolyMat3([[fn(self.entries[i][j]) for j in range(3)] for i in range(3)])

    def __add__(self, other):
        return PolyMat3([[self.entries[i][j] + other.entries[i][j]
                          for j in range(3)] for i in range(3)])

    def __sub__(self, other):
        return PolyMat3([[self.entries[i][j] - other.entries[i][j]
                          for j in range(3)] for i in range(3)])

    def scale(self, c):
        return self.map(lambda p: p * c)

    def transpose(self):
        return PolyMat3([[self.entries[j][i] for j in range(3)] for i in range(3)])

    def trace(self):
        return self.entries[0][0] + self.entries[1][1] + self.entries[2][2]

    def sym(self):
        return (self + self.transpose()).scale(0.5)

    def skew(self):
        return (self - self.transpose()).scale(0.5)

    def dev(self):
        tr = self.trace() * (1.0 / 3.0)
        out = [[self.entries[i][j] for j in range(3)] for i in range(3)]
        for i in range(3):
            out[i][i] = out[i][i] - tr
        return PolyMat3(out)

    @staticmethod
    def identity_times(poly):
        out = PolyMat3.zeros()
        for i in range(3):
            out.entries[i][i] = _as_poly(poly)
        return out

    def curl_rows(self):
        """Row-wise curl: row i of the result is curl of row i."""
        out = PolyMat3.zeros()
        for i in range(3):
            r = self.entries[i]
            out.entries[i][0] = r[2].diff(1) - r[1].diff(2)
            out.entries[i][1] = r[0].diff(2) - r[2].diff(0)
            out.entries[i][2] = r[1].diff(0) - r[0].diff(1)
        return out

    def __call__(self, x):
        return np.array([[self.entries[i][j](x) for j in range(3)] for i in range(3)])


def grad_vec(components) -> PolyMat3:
    """Row-wise gradient of a polynomial 3-vector: out[i][j] = d_j v_i."""
    comps = [_as_poly(c) for c in components]
    return PolyMat3([[comps[i].diff(j) for j in range(3)] for i in range(3)])


def sym_grad(components) -> PolyMat3:
    return grad_vec(components).sym()
