"""Quadrature on the reference triangle (0,0), (1,0), (0,1) and on [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 30


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _orbit_s3(a, w):
    # points (a, a, 1-2a) in barycentric coordinates, all 3 permutations
    b = 1.0 - 2.0 * a
    bary = [(a, a, b), (a, b, a), (b, a, a)]
    return bary, [w] * 3


def _orbit_s21(a, b, w):
    c = 1.0 - a - b
    bary = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return bary, [w] * 6


def _symmetric(orbits, centroid_weight=None):
    bary, weights = [], []
    if centroid_weight is not None:
        bary.append((1 / 3, 1 / 3, 1 / 3))
        weights.append(centroid_weight)
    for pts, ws in orbits:
        bary += pts
        weights += ws
    bary = np.array(bary)
    # weights in the tables are fractions of the triangle area
    return bary[:, 1:], 0.5 * np.array(weights)


# Dunavant rules, all with positive weights.  Degree 3 reuses the degree 4
# rule to avoid the negative centroid weight of the 4-point rule.
_DUNAVANT = {
    1: lambda: _symmetric([], 1.0),
    2: lambda: _symmetric([_orbit_s3(1 / 6, 1 / 3)]),
    4: lambda: _symmetric(
        [
            _orbit_s3(0.445948490915965, 0.223381589678011),
            _orbit_s3(0.091576213509771, 0.109951743655322),
        ]
    ),
    5: lambda: _symmetric(
        [
            _orbit_s3(0.470142064105115, 0.132394152788506),
            _orbit_s3(0.101286507323456, 0.125939180544827),
        ],
        0.225,
    ),
    6: lambda: _symmetric(
        [
            _orbit_s3(0.249286745170910, 0.116786275726379),
            _orbit_s3(0.063089014491502, 0.050844906370207),
            _orbit_s21(0.310352451033784, 0.053145049844817, 0.082851075618374),
        ]
    ),
}
_DUNAVANT[0] = _DUNAVANT[1]
_DUNAVANT[3] = _DUNAVANT[4]


def _conical(degree):
    # collapsed Gauss-Jacobi x Gauss-Legendre product rule
    n = degree // 2 + 1
    xi, wj = roots_jacobi(n, 1.0, 0.0)
    b = 0.5 * (1.0 + xi)
    wb = 0.25 * wj
    s, ws = np.polynomial.legendre.leggauss(n)
    a = 0.5 * (1.0 + s)
    wa = 0.5 * ws
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(wa, wb)
    pts = np.column_stack([(A * (1 - B)).ravel(), B.ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree ``degree``.

    Degrees up to 6 use symmetric Dunavant tables; higher degrees fall back
    to a collapsed (Duffy) Gauss product rule.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be non-negative")
    if degree > MAX_DEGREE:
        raise ValueError(f"no triangle rule above degree {MAX_DEGREE}")
    if degree in _DUNAVANT:
        pts, w = _DUNAVANT[degree]()
    else:
        pts, w = _conical(degree)
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


@lru_cache(maxsize=None)
def gauss_interval(n: int = 5):
    """Gauss-Legendre points and weights mapped to [0, 1]."""
    s, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (1.0 + s), 0.5 * w
