"""Reference Raviart-Thomas and discontinuous Lagrange bases.

The reference triangle has vertices (0,0), (1,0), (0,1).  RT "order" counts
from 1 for the lowest-order space, so order 1 is RT0 (3 dofs) and order 2 is
RT1 (8 dofs).

RT degrees of freedom, per local edge ``i`` (opposite vertex ``i``, traversed
counter-clockwise, parameter ``s`` in [0, 1]):

* ``int_e phi.n ds`` (order 1 and 2)
* ``int_e phi.n (2s - 1) ds`` (order 2 only)

followed, for order 2, by the interior moments ``int_T phi_x`` and
``int_T phi_y``.  ``n`` is the unit outward normal and ``ds`` arc length, so
each dof is a flux and is preserved by the contravariant Piola map.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .quadrature import gauss_interval, triangle_quadrature

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# unscaled outward normals; |n_i| equals the length of edge i, so
# int_e phi.n_unit ds = int_0^1 phi(x(s)).n_i ds
REF_EDGE_NORMALS = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
_EDGE_ENDS = ((1, 2), (2, 0), (0, 1))


def edge_points(edge: int, s):
    """Reference points at parameter ``s`` along local edge ``edge``."""
    a, b = _EDGE_ENDS[edge]
    s = np.asarray(s, dtype=float)[..., None]
    return (1 - s) * REF_VERTICES[a] + s * REF_VERTICES[b]


@dataclass(frozen=True)
class ReferenceBasis:
    family: str
    order: int
    num_dofs: int
    _eval: Callable = None
    _div: Callable = None

    def eval(self, points):
        """Values at ``points`` (n, 2): shape (n, ndofs, 2) for RT and
        (n, ndofs) for DG."""
        return self._eval(np.atleast_2d(np.asarray(points, dtype=float)))

    def div_eval(self, points):
        if self.family != "RT":
            raise TypeError("divergence is only defined for RT bases")
        return self._div(np.atleast_2d(np.asarray(points, dtype=float)))

    @property
    def edge_dofs(self) -> int:
        return self.order if self.family == "RT" else 0

    @property
    def interior_dofs(self) -> int:
        return self.num_dofs - 3 * self.edge_dofs


# prime basis for RT_k with k = 1, 2: P_{k-1}^2 + x * homogeneous P_{k-1}
def _rt_prime(order, pts):
    x, y = pts[:, 0], pts[:, 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    if order == 1:
        vals = [(one, zero), (zero, one), (x, y)]
        divs = [zero, zero, 2 * one]
    else:
        vals = [
            (one, zero), (x, zero), (y, zero),
            (zero, one), (zero, x), (zero, y),
            (x * x, x * y), (x * y, y * y),
        ]
        divs = [zero, one, zero, zero, zero, one, 3 * x, 3 * y]
    v = np.stack([np.stack(c, axis=-1) for c in vals], axis=1)
    d = np.stack(divs, axis=1)
    return v, d


def rt_dofs(order, func):
    """Apply the RT degrees of freedom to a vector field ``func(points)``
    returning (n, ..., 2).  Returns an array of shape (ndofs, ...)."""
    s, w = gauss_interval(5)
    out = []
    for e in range(3):
        vals = func(edge_points(e, s))
        flux = vals @ REF_EDGE_NORMALS[e]
        out.append(np.einsum("q,q...->...", w, flux))
        if order == 2:
            out.append(np.einsum("q,q...->...", w * (2 * s - 1), flux))
    if order == 2:
        rule = triangle_quadrature(4)
        vals = func(rule.points)
        out.append(np.einsum("q,q...->...", rule.weights, vals[..., 0]))
        out.append(np.einsum("q,q...->...", rule.weights, vals[..., 1]))
    return np.array(out)


@lru_cache(maxsize=None)
def reference_rt_basis(order: int) -> ReferenceBasis:
    if order not in (1, 2):
        raise ValueError(f"RT order {order} is not supported (use 1 or 2)")
    # D[i, k] = dof_i(prime_k); the nodal basis is prime @ inv(D).
    D = rt_dofs(order, lambda p: _rt_prime(order, p)[0])
    coeffs = np.linalg.inv(D)

    def ev(p):
        return np.einsum("nkc,kj->njc", _rt_prime(order, p)[0], coeffs)

    def dv(p):
        return _rt_prime(order, p)[1] @ coeffs

    return ReferenceBasis("RT", order, D.shape[0], ev, dv)


@lru_cache(maxsize=None)
def reference_dg_basis(order: int) -> ReferenceBasis:
    if order == 0:
        return ReferenceBasis("DG", 0, 1, lambda p: np.ones((len(p), 1)))
    if order == 1:
        def ev(p):
            return np.column_stack([1 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])

        return ReferenceBasis("DG", 1, 3, ev)
    raise ValueError(f"DG order {order} is not supported (use 0 or 1)")


def geometry_shape(degree: int, points):
    """Lagrange geometry shape functions and reference gradients.

    Node order: the three vertices, then the midpoints of local edges 0, 1, 2.
    Returns ``N`` (n, nnodes) and ``dN`` (n, nnodes, 2).
    """
    p = np.atleast_2d(points)
    x, y = p[:, 0], p[:, 1]
    l0, l1, l2 = 1 - x - y, x, y
    n = len(p)
    if degree == 1:
        N = np.column_stack([l0, l1, l2])
        dN = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (n, 3, 2))
        return N, np.array(dN)
    if degree != 2:
        raise ValueError("geometry degree must be 1 or 2")
    N = np.column_stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1]
    )
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lam = np.column_stack([l0, l1, l2])
    dN = np.empty((n, 6, 2))
    for i in range(3):
        dN[:, i] = (4 * lam[:, i] - 1)[:, None] * dl[i]
    for e, (a, b) in enumerate(_EDGE_ENDS):
        dN[:, 3 + e] = 4 * (lam[:, a, None] * dl[b] + lam[:, b, None] * dl[a])
    return N, dN
