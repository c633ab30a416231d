"""Quadrature rules on the reference tetrahedron.

Rules are returned as (points, weights) with points in barycentric
coordinates (shape (n, 4)) and weights summing to 1; integrals over a
physical tet are weight-sums scaled by the tet volume.

The 4-point rule is exact for quadratics, which covers every integrand
the assemblers produce.  Higher degrees come from a Gauss rule on the
cube mapped through the Duffy transform, so exactness is inherited from
the 1D rule instead of tabulated constants.
"""
from __future__ import annotations

import numpy as np

_A = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
_B = (5.0 - np.sqrt(5.0)) / 20.0

_DEGREE2_POINTS = np.array([
    [_A, _B, _B, _B],
    [_B, _A, _B, _B],
    [_B, _B, _A, _B],
    [_B, _B, _B, _A],
])
_DEGREE2_WEIGHTS = np.full(4, 0.25)


def tet_rule(degree: int):
    """Barycentric points and unit weights exact to the given degree."""
    if degree <= 2:
        return _DEGREE2_POINTS.copy(), _DEGREE2_WEIGHTS.copy()
    return _duffy_rule(degree)


def _duffy_rule(degree: int):
    # Duffy map x = u, y = v(1-u), z = w(1-u)(1-v) carries Jacobian
    # (1-u)^2 (1-v); a 1D rule of 2m-1 >= degree + 2 keeps exactness.
    m = (degree + 4) // 2
    g, gw = np.polynomial.legendre.leggauss(m)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    pts = []
    wts = []
    for iu, u in enumerate(g):
        for iv, v in enumerate(g):
            for iw, w in enumerate(g):
                x = u
                y = v * (1.0 - u)
                z = w * (1.0 - u) * (1.0 - v)
                jac = (1.0 - u) ** 2 * (1.0 - v)
                pts.append([1.0 - x - y - z, x, y, z])
                wts.append(gw[iu] * gw[iv] * gw[iw] * jac)
    pts = np.asarray(pts)
    wts = np.asarray(wts)
    # reference volume of the Duffy image is 1/6; normalize to unit sum
    wts /= wts.sum()
    return pts, wts


def physical_points(points_bary: np.ndarray, tet_vertices: np.ndarray) -> np.ndarray:
    """Map barycentric points to physical coordinates."""
    return points_bary @ tet_vertices
