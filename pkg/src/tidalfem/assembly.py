"""Sparse operators and load vectors for the mixed RT/DG discretization.

All velocity-space operators are returned on the free dofs only: on planar
meshes the normal dofs of boundary edges are eliminated, which imposes
``u.n = 0`` strongly.  Coefficients (``f``, ``C``, ``H`` and weights built
from them) are plain callables of position evaluated at quadrature points.
"""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .fem.space import FunctionSpace, perp


def as_coefficient(value):
    """Wrap a number as a constant coefficient callable."""
    if callable(value):
        return value
    if isinstance(value, numbers.Real):
        c = float(value)
        return lambda x: np.full(len(x), c)
    raise TypeError(f"cannot use {value!r} as a coefficient")


def evaluate_coefficient(coef, space: FunctionSpace, quad=None):
    """Coefficient values at the quadrature points, shape (nc, nq)."""
    q = space.quad if quad is None else quad
    pts = q.xs.reshape(-1, space.mesh.dim)
    vals = np.asarray(as_coefficient(coef)(pts), dtype=float)
    return np.broadcast_to(vals, (len(pts),)).reshape(q.dx.shape)


def _scatter(rows: FunctionSpace, cols: FunctionSpace, local):
    nc, nr, ncol = local.shape
    I = np.broadcast_to(rows.cell_dofs[:, :, None], local.shape).ravel()
    J = np.broadcast_to(cols.cell_dofs[:, None, :], local.shape).ravel()
    A = sp.coo_matrix((local.ravel(), (I, J)), shape=(rows.dim, cols.dim)).tocsr()
    A.sum_duplicates()
    return A


def _restrict(A, rows=None, cols=None):
    if rows is not None:
        A = A[rows]
    if cols is not None:
        A = A[:, cols]
    return A.tocsr()


def assemble_weighted_mass_v(V: FunctionSpace, kappa=1.0, eliminate=True, check=True):
    """``M[i, j] = int kappa phi_j . phi_i``."""
    q = V.quad
    k = evaluate_coefficient(kappa, V)
    if check and np.any(k <= 0):
        raise ValidationError("velocity mass weight must be positive")
    local = np.einsum("cq,cqid,cqjd->cij", q.dx * k, q.phi, q.phi)
    M = _scatter(V, V, local)
    if eliminate:
        M = _restrict(M, V.free_dofs, V.free_dofs)
    return M


def assemble_perp(V: FunctionSpace, weight=1.0, eliminate=True):
    """``R[i, j] = int w phi_j^perp . phi_i``; skew-symmetric."""
    q = V.quad
    w = evaluate_coefficient(weight, V)
    normal = None if q.geom.normal is None else q.geom.normal[:, :, None, :]
    rot = perp(q.phi, normal)
    local = np.einsum("cq,cqid,cqjd->cij", q.dx * w, q.phi, rot)
    # pointwise u^perp . u = 0, so only the antisymmetric part is meaningful
    local = 0.5 * (local - local.transpose(0, 2, 1))
    R = _scatter(V, V, local)
    if eliminate:
        R = _restrict(R, V.free_dofs, V.free_dofs)
    return R


def assemble_div(V: FunctionSpace, W: FunctionSpace, eliminate=True):
    """``B[i, j] = int (div phi_j) psi_i``."""
    if V.mesh is not W.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    q = V.quad
    psi = W.basis.eval(q.rule.points)
    local = np.einsum("cq,qi,cqj->cij", q.dx, psi, q.div)
    B = _scatter(W, V, local)
    if eliminate:
        B = _restrict(B, cols=V.free_dofs)
    return B


def assemble_mass_w(W: FunctionSpace, weight=None):
    """Block-diagonal DG mass matrix, optionally weighted."""
    q = W.quad
    dx = q.dx if weight is None else q.dx * evaluate_coefficient(weight, W)
    local = np.einsum("cq,qi,qj->cij", dx, q.psi, q.psi)
    return _scatter(W, W, local)


def assemble_momentum_rhs(V: FunctionSpace, forcing, t: float, eliminate=True):
    """Load vector ``(F(t), phi_i)`` of a forcing object."""
    b = forcing.load(V, t)
    return b[V.free_dofs] if eliminate else b


def load_vector_field(V: FunctionSpace, values):
    """``b[i] = int F . phi_i`` for ``values`` (nc, nq, d) at quadrature points."""
    q = V.quad
    local = np.einsum("cq,cqd,cqid->ci", q.dx, values, q.phi)
    b = np.zeros(V.dim)
    np.add.at(b, V.cell_dofs, local)
    return b


def load_divergence(V: FunctionSpace, values):
    """``b[i] = int s div(phi_i)`` for scalar ``values`` (nc, nq)."""
    q = V.quad
    local = np.einsum("cq,cq,cqi->ci", q.dx, values, q.div)
    b = np.zeros(V.dim)
    np.add.at(b, V.cell_dofs, local)
    return b
