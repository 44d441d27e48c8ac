"""Function spaces, cell geometry and Piola push-forward."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import GeometryError
from ..mesh import Mesh
from .quadrature import QuadratureRule, triangle_quadrature
from .reference import ReferenceBasis, geometry_shape, reference_dg_basis, reference_rt_basis

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class CellGeometry:
    """Geometry of every cell sampled at a fixed set of reference points.

    ``x`` (nc, nq, d) physical points, ``J`` (nc, nq, d, 2) Jacobians, ``g``
    (nc, nq) area element and, on surfaces, the unit outward ``normal``.
    """

    x: np.ndarray
    J: np.ndarray
    g: np.ndarray
    normal: np.ndarray | None


def cell_geometry(mesh: Mesh, ref_points, cells=None) -> CellGeometry:
    ref_points = np.atleast_2d(ref_points)
    nodes = mesh.geometry_nodes if cells is None else mesh.geometry_nodes[cells]
    N, dN = geometry_shape(mesh.geometry_degree, ref_points)
    x = np.einsum("qa,cad->cqd", N, nodes)
    J = np.einsum("qak,cad->cqdk", dN, nodes)
    if mesh.dim == 2:
        g = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        normal = None
    else:
        c = np.cross(J[..., 0], J[..., 1])
        g = np.linalg.norm(c, axis=-1)
        normal = c / np.where(g > 0, g, 1.0)[..., None]
        # cells are built counter-clockwise seen from outside; enforce anyway
        flip = np.einsum("cqd,cqd->cq", normal, x) < 0
        normal[flip] *= -1
    if np.any(g <= DEGENERATE_TOL):
        raise GeometryError("degenerate or inverted cell geometry")
    return CellGeometry(x, J, g, normal)


def piola_push_forward(J, g, ref_values, ref_div=None):
    """Contravariant Piola map of reference RT values.

    ``J`` (..., d, 2), ``g`` (...) area element, ``ref_values`` (..., nb, 2)
    broadcastable against the leading axes.  Returns physical values
    (..., nb, d) and, when ``ref_div`` is given, physical divergences.
    """
    g = np.asarray(g)
    if np.any(g <= DEGENERATE_TOL):
        raise GeometryError("degenerate Jacobian in Piola map")
    vals = np.einsum("...dk,...bk->...bd", J, ref_values) / g[..., None, None]
    if ref_div is None:
        return vals
    return vals, ref_div / g[..., None]


def perp(vectors, normal=None):
    """Rotate tangent vectors by +90 degrees: ``k x v`` in the plane,
    ``n x v`` on a surface with unit normal ``n``."""
    if normal is None:
        out = np.empty_like(vectors)
        out[..., 0] = -vectors[..., 1]
        out[..., 1] = vectors[..., 0]
        return out
    return np.cross(np.broadcast_to(normal, vectors.shape), vectors)


def tangent_project(vectors, J):
    """Orthogonal projection of ambient vectors onto span(J)."""
    G = np.einsum("...dk,...dl->...kl", J, J)
    coeff = np.linalg.solve(G, np.einsum("...dk,...d->...k", J, vectors)[..., None])[..., 0]
    return np.einsum("...dk,...k->...d", J, coeff)


@dataclass(frozen=True)
class QuadData:
    rule: QuadratureRule
    geom: CellGeometry
    xs: np.ndarray  # quadrature points lifted onto the exact surface
    dx: np.ndarray  # weights times area element, (nc, nq)
    phi: np.ndarray | None = None  # signed physical RT values (nc, nq, nb, d)
    div: np.ndarray | None = None  # signed physical divergences (nc, nq, nb)
    psi: np.ndarray | None = None  # DG values (nq, nb)


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    mesh: Mesh
    family: str
    order: int
    basis: ReferenceBasis
    dim: int
    cell_dofs: np.ndarray
    cell_signs: np.ndarray
    boundary_dofs: np.ndarray

    @property
    def global_dim(self) -> int:
        return self.dim

    @cached_property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    @property
    def num_free(self) -> int:
        return len(self.free_dofs)

    @property
    def quad_degree(self) -> int:
        p = self.order if self.family == "RT" else self.order + 1
        return 2 * p + (4 if self.mesh.geometry_degree > 1 else 2)

    @cached_property
    def quad(self) -> QuadData:
        return self.quad_data(self.quad_degree)

    def quad_data(self, degree: int) -> QuadData:
        rule = triangle_quadrature(degree)
        geom = cell_geometry(self.mesh, rule.points)
        xs = self.mesh.lift(geom.x)
        dx = rule.weights * geom.g
        if self.family == "DG":
            return QuadData(rule, geom, xs, dx, psi=self.basis.eval(rule.points))
        phi, div = piola_push_forward(
            geom.J, geom.g, self.basis.eval(rule.points), self.basis.div_eval(rule.points)
        )
        s = self.cell_signs[:, None, :]
        return QuadData(rule, geom, xs, dx, phi=phi * s[..., None], div=div * s)

    def restrict(self, coefficients):
        """Full coefficient vector -> free (non-boundary) part."""
        return np.asarray(coefficients)[..., self.free_dofs]

    def extend(self, free_values):
        out = np.zeros(free_values.shape[:-1] + (self.dim,))
        out[..., self.free_dofs] = free_values
        return out


@dataclass
class Field:
    space: FunctionSpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.dim,):
            raise ValueError(
                f"expected {self.space.dim} coefficients, got {self.coefficients.shape}"
            )

    @classmethod
    def zeros(cls, space):
        return cls(space, np.zeros(space.dim))

    def copy(self):
        return Field(self.space, self.coefficients.copy())


def build_space(mesh: Mesh, family: str, order: int) -> FunctionSpace:
    """RT (order 1 or 2) or DG (order 0 or 1) space on ``mesh``."""
    family = family.upper()
    nc, ne = mesh.num_cells, mesh.num_edges
    if family == "RT":
        basis = reference_rt_basis(order)
        if mesh.on_sphere and mesh.geometry_degree < order:
            raise GeometryError(
                f"RT order {order} on a curved surface needs geometry degree {order}"
            )
        k = order
        ni = basis.interior_dofs
        dofs = np.empty((nc, basis.num_dofs), dtype=np.int64)
        signs = np.ones((nc, basis.num_dofs))
        for e in range(3):
            for m in range(k):
                dofs[:, e * k + m] = mesh.cell_edges[:, e] * k + m
            # the higher edge moment flips twice (normal and parameter)
            signs[:, e * k] = mesh.cell_edge_signs[:, e]
        for j in range(ni):
            dofs[:, 3 * k + j] = ne * k + np.arange(nc) * ni + j
        dim = ne * k + nc * ni
        boundary = (mesh.boundary_edges[:, None] * k + np.arange(k)).ravel()
    elif family == "DG":
        basis = reference_dg_basis(order)
        nb = basis.num_dofs
        dofs = np.arange(nc * nb, dtype=np.int64).reshape(nc, nb)
        signs = np.ones((nc, nb))
        dim = nc * nb
        boundary = np.empty(0, dtype=np.int64)
    else:
        raise ValueError(f"unknown family {family!r}")
    for arr in (dofs, signs, boundary):
        arr.setflags(write=False)
    return FunctionSpace(mesh, family, order, basis, dim, dofs, signs, np.sort(boundary))


def evaluate_field(field: Field, cell: int, ref_point):
    """Value of ``field`` at reference point(s) ``ref_point`` of ``cell``."""
    space = field.space
    if not 0 <= cell < space.mesh.num_cells:
        raise IndexError(f"cell {cell} out of range")
    pts = np.atleast_2d(np.asarray(ref_point, dtype=float))
    c = field.coefficients[space.cell_dofs[cell]] * space.cell_signs[cell]
    if space.family == "DG":
        vals = space.basis.eval(pts) @ c
    else:
        geom = cell_geometry(space.mesh, pts, cells=[cell])
        phi = piola_push_forward(geom.J[0], geom.g[0], space.basis.eval(pts))
        vals = np.einsum("qbd,b->qd", phi, c)
    return vals[0] if np.ndim(ref_point) == 1 else vals
