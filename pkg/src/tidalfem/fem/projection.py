"""Commuting projections: canonical RT interpolation and DG L2 projection."""

from __future__ import annotations

import numpy as np

from .quadrature import gauss_interval, triangle_quadrature
from .reference import REF_EDGE_NORMALS, edge_points
from .space import Field, FunctionSpace, cell_geometry

# interior RT moments of non-polynomial fields; high enough that quadrature
# error stays below the commuting-diagram tolerance
INTERIOR_MOMENT_DEGREE = 12


def _pull_back(J, g, u):
    # inverse contravariant Piola: g * (J^T J)^{-1} J^T u; drops normal parts
    G = np.einsum("...dk,...dl->...kl", J, J)
    rhs = np.einsum("...dk,...d->...k", J, u)
    return g[..., None] * np.linalg.solve(G, rhs[..., None])[..., 0]


def _sample(mesh, func, ref_points):
    geom = cell_geometry(mesh, ref_points)
    xs = mesh.lift(geom.x)
    vals = np.asarray(func(xs.reshape(-1, mesh.dim)), dtype=float)
    return geom, vals.reshape(xs.shape[:2] + vals.shape[1:])


def interpolate_hdiv(space: FunctionSpace, u) -> Field:
    """Canonical interpolant of the vector field ``u(x)`` into an RT space.

    Edge moments use 5-point Gauss quadrature.  On surfaces each incident
    cell sees ``u`` through its own tangent plane, so the two one-sided
    moments are averaged.
    """
    if space.family != "RT":
        raise ValueError("interpolate_hdiv needs an RT space")
    mesh, k = space.mesh, space.order
    s, w = gauss_interval(5)
    coeffs = np.zeros(space.dim)
    counts = np.zeros(space.dim)
    for e in range(3):
        geom, vals = _sample(mesh, u, edge_points(e, s))
        flux = _pull_back(geom.J, geom.g, vals) @ REF_EDGE_NORMALS[e]
        moments = [flux @ w]
        if k == 2:
            moments.append(flux @ (w * (2 * s - 1)))
        for m, mom in enumerate(moments):
            local = e * k + m
            idx = space.cell_dofs[:, local]
            np.add.at(coeffs, idx, mom * space.cell_signs[:, local])
            np.add.at(counts, idx, 1.0)
    edge_part = counts > 0
    coeffs[edge_part] /= counts[edge_part]
    if k == 2:
        rule = triangle_quadrature(INTERIOR_MOMENT_DEGREE + 2 * (mesh.geometry_degree - 1))
        geom, vals = _sample(mesh, u, rule.points)
        uhat = _pull_back(geom.J, geom.g, vals)
        for j in range(2):
            coeffs[space.cell_dofs[:, 3 * k + j]] = uhat[..., j] @ rule.weights
    return Field(space, coeffs)


def dg_local_mass(space: FunctionSpace):
    q = space.quad
    return np.einsum("cq,qi,qj->cij", q.dx, q.psi, q.psi)


def project_l2(space: FunctionSpace, s) -> Field:
    """Cellwise L2 projection of the scalar function ``s(x)`` into a DG space."""
    if space.family != "DG":
        raise ValueError("project_l2 needs a DG space")
    q = space.quad
    vals = np.asarray(s(q.xs.reshape(-1, space.mesh.dim)), dtype=float)
    vals = np.broadcast_to(vals, (q.xs.shape[0] * q.xs.shape[1],)).reshape(q.dx.shape)
    rhs = np.einsum("cq,cq,qi->ci", q.dx, vals, q.psi)
    local = np.linalg.solve(dg_local_mass(space), rhs[..., None])[..., 0]
    coeffs = np.empty(space.dim)
    coeffs[space.cell_dofs] = local
    return Field(space, coeffs)


def values_at_quadrature(field: Field, quad=None):
    """Field values at the quadrature points of its space: (nc, nq[, d])."""
    space = field.space
    q = space.quad if quad is None else quad
    c = field.coefficients[space.cell_dofs]
    if space.family == "DG":
        return np.einsum("cb,qb->cq", c, q.psi)
    return np.einsum("cb,cqbd->cqd", c, q.phi)


def divergence_at_quadrature(field: Field, quad=None):
    space = field.space
    q = space.quad if quad is None else quad
    return np.einsum("cb,cqb->cq", field.coefficients[space.cell_dofs], q.div)
