"""Linearized rotating shallow-water model and its time steppers.

The unknowns are the linearized momentum ``u`` (RT) and the free-surface
elevation ``eta`` (DG).  With ``g = beta / eps**2`` the semidiscrete system is

    (u_t / H, v) + (f u^perp / (eps H), v) - g (eta, div v) + (C u / H, v) = (F, v)
    (eta_t, w) + (div u, w) = 0
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .assembly import (
    as_coefficient,
    assemble_div,
    assemble_mass_w,
    assemble_perp,
    assemble_weighted_mass_v,
    evaluate_coefficient,
    load_divergence,
    load_vector_field,
)
from .errors import ConvergenceError, ValidationError
from .fem.projection import dg_local_mass, interpolate_hdiv, project_l2
from .fem.space import Field, FunctionSpace, build_space, perp, tangent_project
from .forcing import ForcingSpec, ZeroForcing
from .linalg import BlockSystem, LinearSolver, SolverConfig
from .mesh import Mesh

log = logging.getLogger(__name__)


@dataclass
class ModelParams:
    epsilon: float = 0.1
    beta: float = 0.1
    f: Callable | float = 1.0
    C: Callable | float = 0.0
    H: Callable | float = 1.0
    H_star: float = 1e-3

    def __post_init__(self):
        if not (self.epsilon > 0 and self.beta > 0):
            raise ValidationError("epsilon and beta must be positive")
        if not self.H_star > 0:
            raise ValidationError("H_star must be positive")

    @property
    def gravity(self) -> float:
        """Pressure-gradient coefficient ``beta / epsilon**2``."""
        return self.beta / self.epsilon**2

    def replace(self, **changes):
        kw = dict(self.__dict__)
        kw.update(changes)
        return ModelParams(**kw)


class Discretization:
    """A compatible RT/DG pair with the operators of one parameter set.

    Operators act on free velocity dofs.  Matrices are assembled lazily and
    cached, as are the linear solvers built on them.
    """

    def __init__(self, V: FunctionSpace, W: FunctionSpace, params: ModelParams):
        if V.family != "RT" or W.family != "DG" or W.order != V.order - 1:
            raise ValueError("need an RT(k) / DG(k-1) pair")
        if V.mesh is not W.mesh:
            raise ValueError("spaces must share a mesh")
        self.V, self.W, self.params = V, W, params
        H = evaluate_coefficient(params.H, V)
        C = evaluate_coefficient(params.C, V)
        if np.any(H < params.H_star):
            raise ValidationError(f"H drops below H_star={params.H_star}")
        if np.any(C < 0):
            raise ValidationError("drag coefficient C must be non-negative")
        self._cache = {}

    @classmethod
    def build(cls, mesh: Mesh, order: int, params: ModelParams):
        return cls(build_space(mesh, "RT", order), build_space(mesh, "DG", order - 1), params)

    @property
    def mesh(self):
        return self.V.mesh

    @property
    def n_u(self):
        return self.V.num_free

    @property
    def n_eta(self):
        return self.W.dim

    def _inv_H(self, x):
        return 1.0 / as_coefficient(self.params.H)(x)

    @cached_property
    def M(self):
        """Velocity mass matrix weighted by ``1/H``."""
        return assemble_weighted_mass_v(self.V, self._inv_H)

    @cached_property
    def M_plain(self):
        return assemble_weighted_mass_v(self.V, 1.0)

    @cached_property
    def K(self):
        """Drag matrix weighted by ``C/H``."""
        C = as_coefficient(self.params.C)
        return assemble_weighted_mass_v(self.V, lambda x: C(x) * self._inv_H(x), check=False)

    @cached_property
    def R(self):
        """Coriolis matrix weighted by ``f/(eps H)``."""
        f = as_coefficient(self.params.f)
        eps = self.params.epsilon
        return assemble_perp(self.V, lambda x: f(x) * self._inv_H(x) / eps)

    @cached_property
    def B(self):
        return assemble_div(self.V, self.W)

    @cached_property
    def M_W(self):
        return assemble_mass_w(self.W)

    @cached_property
    def M_W_invH(self):
        return assemble_mass_w(self.W, self._inv_H)

    @cached_property
    def M_W_inv(self) -> "DGMassInverse":
        return DGMassInverse(self.W)

    @cached_property
    def ones_W(self):
        return np.ones(self.W.dim)

    @cached_property
    def pressure_null(self):
        """Constant pressure mode if it lies in ker(B^T), else None."""
        r = np.abs(self.B.T @ self.ones_W).max() if self.n_u else 0.0
        scale = max(abs(self.B).max(), 1.0) if self.B.nnz else 1.0
        return self.ones_W if r <= 1e-10 * scale else None

    def zero_mean(self, eta):
        """Remove the area-weighted mean of a pressure coefficient vector."""
        m = self.M_W @ self.ones_W
        return eta - self.ones_W * (m @ eta) / (m @ self.ones_W)

    def solver(self, key, factory):
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    def mass_solve(self, b, cfg: SolverConfig | None = None):
        cfg = cfg or SolverConfig(rel_tol=1e-12, method="direct")
        s = self.solver(("mass", cfg), lambda: LinearSolver(self.M, cfg, symmetric=True))
        return s(b)

    def rhs(self, forcing: ForcingSpec | None, t: float):
        if forcing is None or isinstance(forcing, ZeroForcing):
            return np.zeros(self.n_u)
        return forcing.load(self.V, t)[self.V.free_dofs]

    def tendency(self, u, eta, forcing=None, t=0.0):
        """``u_t`` from the momentum equation at a given state."""
        g = self.params.gravity
        r = self.rhs(forcing, t) - self.R @ u - self.K @ u + g * (self.B.T @ eta)
        return self.mass_solve(r)


class DGMassInverse:
    """Cellwise inverse of the block-diagonal DG mass matrix."""

    def __init__(self, W: FunctionSpace):
        self.W = W
        self.local_inv = np.linalg.inv(dg_local_mass(W))

    def __matmul__(self, b):
        local = b[self.W.cell_dofs]
        out = np.empty_like(b)
        out[self.W.cell_dofs] = np.einsum("cij,cj->ci", self.local_inv, local)
        return out


@dataclass
class State:
    u: Field
    eta: Field
    t: float = 0.0

    def __post_init__(self):
        if self.u.space.mesh is not self.eta.space.mesh:
            raise ValueError("u and eta must live on the same mesh")

    def copy(self):
        return State(self.u.copy(), self.eta.copy(), self.t)

    @classmethod
    def zeros(cls, disc: Discretization, t=0.0):
        return cls(Field.zeros(disc.V), Field.zeros(disc.W), t)

    @classmethod
    def from_free(cls, disc, u_free, eta, t):
        return cls(Field(disc.V, disc.V.extend(u_free)), Field(disc.W, eta), t)

    def free(self):
        return self.u.space.restrict(self.u.coefficients), self.eta.coefficients


def random_state(disc: Discretization, seed=None, t=0.0) -> State:
    """Uniform [-1, 1] coefficients with a zero-mean elevation."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, disc.n_u)
    eta = disc.zero_mean(rng.uniform(-1.0, 1.0, disc.n_eta))
    return State.from_free(disc, u, eta, t)


def initial_state(disc: Discretization, u=None, eta=None, t=0.0) -> State:
    """Interpolate closed-form initial conditions (callables of position)."""
    uf = interpolate_hdiv(disc.V, u) if u is not None else Field.zeros(disc.V)
    uf.coefficients[disc.V.boundary_dofs] = 0.0
    ef = project_l2(disc.W, eta) if eta is not None else Field.zeros(disc.W)
    return State(uf, ef, t)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "midpoint"
    solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(rel_tol=1e-12, method="direct")
    )

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("midpoint", "symplectic"):
            raise ValueError("scheme must be 'midpoint' or 'symplectic'")


def midpoint_system(disc: Discretization, dt: float) -> BlockSystem:
    """Block operator of one implicit-midpoint step, rows scaled by dt."""
    g = disc.params.gravity
    A = (disc.M + 0.5 * dt * (disc.R + disc.K)).tocsr()
    return BlockSystem(
        A=A,
        Bt=(-0.5 * dt * g * disc.B.T).tocsr(),
        B=(0.5 * dt * disc.B).tocsr(),
        D=disc.M_W,
        precond_blocks=(A, disc.M_W),
    )


def step_implicit_midpoint(state: State, disc: Discretization, forcing, cfg: StepperConfig) -> State:
    """Advance by ``cfg.dt`` with the implicit midpoint rule.

    All non-derivative terms are averaged between the two time levels and
    the forcing is sampled at ``t + dt/2``.
    """
    dt, g = cfg.dt, disc.params.gravity
    op = disc.solver(("midpoint", dt), lambda: midpoint_system(disc, dt))
    solve = disc.solver(("midpoint-solver", dt, cfg.solver), lambda: LinearSolver(op, cfg.solver))
    u0, e0 = state.free()
    half = 0.5 * dt * (disc.R @ u0 + disc.K @ u0)
    top = disc.M @ u0 - half + 0.5 * dt * g * (disc.B.T @ e0)
    top += dt * disc.rhs(forcing, state.t + 0.5 * dt)
    bot = disc.M_W @ e0 - 0.5 * dt * (disc.B @ u0)
    try:
        x = solve(np.concatenate([top, bot]))
    except ConvergenceError as exc:
        raise ConvergenceError(f"implicit midpoint step at t={state.t:g}: {exc}",
                               exc.residual, exc.iterations) from exc
    return State.from_free(disc, x[: disc.n_u], x[disc.n_u:], state.t + dt)


def step_symplectic_euler(state: State, disc: Discretization, forcing, cfg: StepperConfig) -> State:
    """Momentum first (Coriolis and drag averaged, pressure explicit), then
    elevation from the new momentum.  Only mass-like systems are solved."""
    dt, g = cfg.dt, disc.params.gravity

    def factory():
        A = (disc.M + 0.5 * dt * (disc.R + disc.K)).tocsr()
        return A, LinearSolver(A, cfg.solver, precond=disc.M)

    A, solve = disc.solver(("symplectic", dt, cfg.solver), factory)
    u0, e0 = state.free()
    rhs = disc.M @ u0 - 0.5 * dt * (disc.R @ u0 + disc.K @ u0) + dt * g * (disc.B.T @ e0)
    rhs += dt * disc.rhs(forcing, state.t)
    try:
        u1 = solve(rhs)
    except ConvergenceError as exc:
        raise ConvergenceError(f"symplectic Euler step at t={state.t:g}: {exc}",
                               exc.residual, exc.iterations) from exc
    e1 = e0 - dt * (disc.M_W_inv @ (disc.B @ u1))
    return State.from_free(disc, u1, e1, state.t + dt)


STEPPERS = {"midpoint": step_implicit_midpoint, "symplectic": step_symplectic_euler}


@dataclass
class Trajectory:
    records: list
    final: State

    def column(self, name):
        return np.array([r[name] for r in self.records])

    @property
    def times(self):
        return self.column("t") if self.records else np.empty(0)


def run(initial: State, disc: Discretization, forcing, cfg: StepperConfig, n_steps: int,
        observers: Sequence[Callable] = ()) -> Trajectory:
    """Apply the configured stepper ``n_steps`` times.

    After every step each observer is called with the new state and must
    return a dict of scalars; the merged dicts form one record.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    step = STEPPERS[cfg.scheme]
    state = initial
    records = []
    for n in range(n_steps):
        try:
            state = step(state, disc, forcing, cfg)
        except ConvergenceError as exc:
            raise ConvergenceError(f"step {n}: {exc}", exc.residual, exc.iterations) from exc
        rec = {"t": state.t}
        for obs in observers:
            rec.update(obs(state))
        records.append(rec)
    return Trajectory(records, state)


# -- manufactured solution on the unit sphere ---------------------------------


def _grad_xyz(x):
    # tangential gradient of xyz on the unit sphere, as a 3D field
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([Y * Z * (1 - 3 * X**2), X * Z * (1 - 3 * Y**2), X * Y * (1 - 3 * Z**2)], axis=-1)


def _surface_div_complex_step(fn, x, h=1e-20):
    # div_s u = tr(grad u) - n.(grad u) n on the unit sphere, derivatives by
    # complex step (exact to round-off for analytic fields)
    n = x / np.linalg.norm(x, axis=-1, keepdims=True)
    grad = np.empty(x.shape[:-1] + (3, 3))
    for k in range(3):
        xc = x.astype(complex)
        xc[..., k] += 1j * h
        grad[..., :, k] = fn(xc).imag / h
    return np.trace(grad, axis1=-2, axis2=-1) - np.einsum("...i,...ij,...j->...", n, grad, n)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution on the unit sphere driven by a tangential forcing.

    ``u = -cos(omega t) grad_s(xyz) / 12`` has surface divergence
    ``cos(omega t) xyz``; the elevation ``eta = -sin(omega t) xyz / omega``
    then satisfies the continuity equation exactly.
    """

    omega: float = 2.0

    def __post_init__(self):
        pts = np.random.default_rng(0).normal(size=(32, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        for t in (0.0, 0.37, 1.3):
            div = _surface_div_complex_step(lambda x: self.u(x, t), pts)
            res = np.abs(self.eta_t(pts, t) + div).max()
            if res > 1e-10:
                raise ValidationError(f"manufactured solution violates continuity ({res:.2e})")

    def _sinc_t(self, t):
        w = self.omega
        return np.sin(w * t) / w if w != 0 else t

    def u(self, x, t):
        return -np.cos(self.omega * t) / 12.0 * _grad_xyz(x)

    def u_t(self, x, t):
        return self.omega * np.sin(self.omega * t) / 12.0 * _grad_xyz(x)

    def div_u(self, x, t):
        return np.cos(self.omega * t) * x[..., 0] * x[..., 1] * x[..., 2]

    def eta(self, x, t):
        return -self._sinc_t(t) * x[..., 0] * x[..., 1] * x[..., 2]

    def eta_t(self, x, t):
        return -np.cos(self.omega * t) * x[..., 0] * x[..., 1] * x[..., 2]


@dataclass
class MMSForcing(ForcingSpec):
    """``(u_t/H + f u^perp/(eps H) + C u/H, v) - g (eta, div v)`` of the exact
    fields, with the velocity projected on each cell's tangent plane."""

    ms: ManufacturedSolution
    params: ModelParams

    def momentum_field(self, V: FunctionSpace, t):
        q = V.quad
        p = self.params
        J = q.geom.J
        u = tangent_project(self.ms.u(q.xs, t), J)
        ut = tangent_project(self.ms.u_t(q.xs, t), J)
        H = evaluate_coefficient(p.H, V)[..., None]
        f = evaluate_coefficient(p.f, V)[..., None]
        C = evaluate_coefficient(p.C, V)[..., None]
        return ut / H + f / (p.epsilon * H) * perp(u, q.geom.normal) + C / H * u

    def load(self, V, t):
        q = V.quad
        b = load_vector_field(V, self.momentum_field(V, t))
        return b - self.params.gravity * load_divergence(V, self.ms.eta(q.xs, t))


def mms_forcing(ms: ManufacturedSolution, params: ModelParams) -> MMSForcing:
    return MMSForcing(ms, params)


def mms_initial_state(disc: Discretization, ms: ManufacturedSolution, t=0.0) -> State:
    return initial_state(disc, u=lambda x: ms.u(x, t), eta=lambda x: ms.eta(x, t), t=t)
