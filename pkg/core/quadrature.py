"""Quadrature rules on the reference simplices.

Points are returned as barycentric coordinates and weights are normalised
to sum to one, so a physical rule is ``volume * weights`` at
``bary @ vertices``. Every rule has strictly interior points.
"""
import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def _tet_orbit_4(a, w):
    b = 1.0 - 3.0 * a
    pts = [[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
    return pts, [w] * 4


def _tet_orbit_6(a, w):
    b = 0.5 - a
    pts = [
        [a, a, b, b], [a, b, a, b], [a, b, b, a],
        [b, a, a, b], [b, a, b, a], [b, b, a, a],
    ]
    return pts, [w] * 6


def _tet_degree5():
    pts, wts = [], []
    for orbit in (
        _tet_orbit_4(0.0927352503108912, 0.01224884051939366),
        _tet_orbit_4(0.3108859192633006, 0.01878132095300264),
        _tet_orbit_6(0.0455037041256496, 0.007091003462846911),
    ):
        pts += orbit[0]
        wts += orbit[1]
    return np.array(pts), 6.0 * np.array(wts)


def _conical_tet(degree):
    m = max(1, math.ceil((degree + 1) / 2))
    s1, w1 = roots_jacobi(m, 2.0, 0.0)
    s2, w2 = roots_jacobi(m, 1.0, 0.0)
    s3, w3 = roots_legendre(m)
    t1, t2, t3 = (s1 + 1) / 2, (s2 + 1) / 2, (s3 + 1) / 2
    w1, w2, w3 = w1 / 8, w2 / 4, w3 / 2
    T1, T2, T3 = np.meshgrid(t1, t2, t3, indexing="ij")
    W = np.einsum("i,j,k->ijk", w1, w2, w3)
    x = T1
    y = (1 - T1) * T2
    z = (1 - T1) * (1 - T2) * T3
    bary = np.column_stack([(1 - x - y - z).ravel(), x.ravel(), y.ravel(), z.ravel()])
    return bary, 6.0 * W.ravel()


def _conical_triangle(degree):
    m = max(1, math.ceil((degree + 1) / 2))
    s1, w1 = roots_jacobi(m, 1.0, 0.0)
    s2, w2 = roots_legendre(m)
    t1, t2 = (s1 + 1) / 2, (s2 + 1) / 2
    T1, T2 = np.meshgrid(t1, t2, indexing="ij")
    W = np.outer(w1 / 4, w2 / 2)
    x = T1
    y = (1 - T1) * T2
    bary = np.column_stack([(1 - x - y).ravel(), x.ravel(), y.ravel()])
    return bary, 2.0 * W.ravel()


@lru_cache(maxsize=None)
def _tet_rule(degree):
    if degree <= 1:
        return np.full((1, 4), 0.25), np.ones(1)
    if degree == 2:
        a, b = 0.1381966011250105, 0.5854101966249685
        bary = np.full((4, 4), a)
        np.fill_diagonal(bary, b)
        return bary, np.full(4, 0.25)
    if degree == 5:
        return _tet_degree5()
    return _conical_tet(degree)


@lru_cache(maxsize=None)
def _triangle_rule(degree):
    if degree <= 1:
        return np.full((1, 3), 1.0 / 3.0), np.ones(1)
    if degree == 2:
        bary = np.full((3, 3), 1.0 / 6.0)
        np.fill_diagonal(bary, 2.0 / 3.0)
        return bary, np.full(3, 1.0 / 3.0)
    return _conical_triangle(degree)


def tet_rule(degree: int):
    bary, w = _tet_rule(int(degree))
    return bary.copy(), w.copy()


def triangle_rule(degree: int):
    bary, w = _triangle_rule(int(degree))
    return bary.copy(), w.copy()


def line_rule(degree: int):
    """Gauss-Legendre on [0, 1]: (points, weights summing to 1)."""
    m = max(1, math.ceil((degree + 1) / 2))
    s, w = roots_legendre(m)
    return (s + 1) / 2, w / 2
