"""Energies, norms, error measures and constant estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import evaluate_coefficient
from .dynamics import Discretization, ManufacturedSolution, State, mms_forcing
from .fem.projection import divergence_at_quadrature, values_at_quadrature
from .fem.space import Field, FunctionSpace, tangent_project
from .linalg import BlockSystem, LinearSolver, SolverConfig

DIRECT = SolverConfig(rel_tol=1e-12, method="direct")


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E1: float
    u_norm_wH: float
    eta_norm: float
    div_u_norm: float
    E2: float | None = None

    def as_dict(self):
        d = {
            "E1": self.E1,
            "u_norm": self.u_norm_wH,
            "eta_norm": self.eta_norm,
            "div_u_norm": self.div_u_norm,
        }
        if self.E2 is not None:
            d["E2"] = self.E2
        return d


@dataclass
class HelmholtzParts:
    uD: Field
    uS: Field


def _div_norm_sq(disc: Discretization, u):
    Bu = disc.B @ u
    return float(Bu @ (disc.M_W_inv @ Bu))


def energy_first_order(state: State, disc: Discretization) -> EnergyReport:
    """``E1 = |u|^2_{1/H} / 2 + g |eta|^2 / 2`` and the norms it is made of."""
    u, eta = state.free()
    un2 = float(u @ (disc.M @ u))
    en2 = float(eta @ (disc.M_W @ eta))
    E1 = 0.5 * un2 + 0.5 * disc.params.gravity * en2
    return EnergyReport(state.t, E1, np.sqrt(un2), np.sqrt(en2), np.sqrt(_div_norm_sq(disc, u)))


def energy_second_order(state: State, disc: Discretization, forcing=None) -> EnergyReport:
    """First-order report plus ``E = |u_t|^2_{1/H} / 2 + g |div u|^2 / 2``.

    ``u_t`` comes from a mass solve of the momentum equation at the state.
    """
    rep = energy_first_order(state, disc)
    u, eta = state.free()
    ut = disc.tendency(u, eta, forcing, state.t)
    E2 = 0.5 * float(ut @ (disc.M @ ut)) + 0.5 * disc.params.gravity * rep.div_u_norm**2
    return EnergyReport(rep.t, rep.E1, rep.u_norm_wH, rep.eta_norm, rep.div_u_norm, E2)


def _saddle(disc: Discretization, A, g=1.0):
    return BlockSystem(
        A=A.tocsr(),
        Bt=(-g * disc.B.T).tocsr(),
        B=disc.B,
        pressure_null=disc.pressure_null,
        pressure_mass=disc.M_W @ disc.ones_W,
    )


def _helmholtz_solver(disc: Discretization, cfg=DIRECT):
    return disc.solver(
        ("helmholtz", cfg),
        lambda: LinearSolver(_saddle(disc, disc.M), cfg, project_mean=True),
    )


def helmholtz_decompose(u: Field, disc: Discretization, cfg=DIRECT) -> HelmholtzParts:
    """Split ``u`` into a ``1/H``-orthogonal divergent part and a solenoidal
    remainder.  The divergent part is the minimum ``1/H``-norm field with the
    same divergence as ``u``."""
    V = disc.V
    uf = V.restrict(u.coefficients)
    rhs = np.concatenate([np.zeros(disc.n_u), disc.B @ uf])
    w = _helmholtz_solver(disc, cfg)(rhs)[: disc.n_u]
    uD = Field(V, V.extend(w))
    uS = Field(V, u.coefficients - uD.coefficients)
    return HelmholtzParts(uD, uS)


def solve_steady_geotryptic(disc: Discretization, forcing=None, t=0.0, cfg=DIRECT):
    """Steady balance of drag, Coriolis and pressure gradient under forcing.

    Returns ``(u, eta)`` as fields; ``eta`` has zero mean when constants are
    in the pressure kernel.
    """
    op = _saddle(disc, disc.K + disc.R, disc.params.gravity)
    b = np.concatenate([disc.rhs(forcing, t), np.zeros(disc.n_eta)])
    x = LinearSolver(op, cfg, project_mean=True)(b)
    return Field(disc.V, disc.V.extend(x[: disc.n_u])), Field(disc.W, x[disc.n_u:])


def _l2_cell(diff2, dx):
    return float(np.sqrt(max(np.sum(diff2 * dx), 0.0)))


def eta_error(eta: Field, exact, t):
    W = eta.space
    q = W.quad
    diff = values_at_quadrature(eta) - exact(q.xs, t)
    return _l2_cell(diff**2, q.dx)


def l2_errors(state: State, ms: ManufacturedSolution, disc: Discretization, forcing=None):
    """``(err_u_wH, err_eta, err_div_u, err_ut_wH)`` against a manufactured
    solution, by quadrature of pointwise differences."""
    V = disc.V
    q = V.quad
    t = state.t
    invH = 1.0 / evaluate_coefficient(disc.params.H, V)
    u_ex = tangent_project(ms.u(q.xs, t), q.geom.J)
    du = values_at_quadrature(state.u) - u_ex
    err_u = _l2_cell(invH * np.sum(du**2, axis=-1), q.dx)
    err_div = _l2_cell((divergence_at_quadrature(state.u) - ms.div_u(q.xs, t)) ** 2, q.dx)
    err_eta = eta_error(state.eta, ms.eta, t)
    forcing = forcing if forcing is not None else mms_forcing(ms, disc.params)
    u, eta = state.free()
    ut = Field(V, V.extend(disc.tendency(u, eta, forcing, t)))
    dut = values_at_quadrature(ut) - tangent_project(ms.u_t(q.xs, t), q.geom.J)
    err_ut = _l2_cell(invH * np.sum(dut**2, axis=-1), q.dx)
    return err_u, err_eta, err_div, err_ut


def estimate_poincare_constant(disc: Discretization, max_iters=30, tol=1e-8, seed=0):
    """Estimate the smallest ``C_P`` with ``|u_D|_{1/H} <= C_P |div u_D|_{1/H}``.

    Divergent fields are parametrized by their divergence ``d``; the squared
    ratio is a generalized Rayleigh quotient whose top eigenvalue is found by
    power iteration with the Helmholtz (inverse Laplacian) solve.
    """
    solve = _helmholtz_solver(disc)
    n_u = disc.n_u
    M_W, M_h = disc.M_W, disc.M_W_invH
    lu_h = disc.solver(("wmass-invH",), lambda: LinearSolver(M_h, DIRECT, symmetric=True))
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(disc.n_eta)
    mu_old = None
    mu = 0.0
    for _ in range(max_iters):
        if disc.pressure_null is not None:
            d = disc.zero_mean(d)
        d /= np.sqrt(d @ (M_h @ d))
        x = solve(np.concatenate([np.zeros(n_u), M_W @ d]))
        p = x[n_u:]
        y = M_W @ p
        mu = float(d @ y)  # ||u_D||^2 / ||div u_D||^2_{1/H}
        if mu_old is not None and abs(mu - mu_old) <= tol * abs(mu):
            break
        mu_old = mu
        d = lu_h(y)
    return float(np.sqrt(max(mu, 0.0)))


def estimate_inverse_constant(V: FunctionSpace, W: FunctionSpace, h_max: float, B=None,
                              M_V=None, M_W=None, max_iters=100, tol=1e-8, seed=0):
    """``h_max * sqrt(lambda_max)`` for ``B^T M_W^-1 B x = lambda M_V x``."""
    from .assembly import assemble_div, assemble_mass_w, assemble_weighted_mass_v

    B = assemble_div(V, W) if B is None else sp.csr_matrix(B)
    if B.nnz == 0 or abs(B).max() == 0:
        return 0.0
    M_V = assemble_weighted_mass_v(V, 1.0) if M_V is None else M_V
    M_W = assemble_mass_w(W) if M_W is None else M_W
    mv = LinearSolver(M_V, DIRECT, symmetric=True)
    mw = LinearSolver(M_W, DIRECT, symmetric=True)
    x = np.random.default_rng(seed).standard_normal(B.shape[1])
    lam_old = None
    lam = 0.0
    for _ in range(max_iters):
        x /= np.sqrt(x @ (M_V @ x))
        Kx = B.T @ mw(B @ x)
        lam = float(x @ Kx)
        if lam_old is not None and abs(lam - lam_old) <= tol * abs(lam):
            break
        lam_old = lam
        x = mv(Kx)
    return float(h_max * np.sqrt(max(lam, 0.0)))


def fit_convergence_rate(h_values, error_values):
    """Least-squares slope of ``log(error)`` against ``log(h)`` and its R^2."""
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(error_values, dtype=float)
    if h.shape != e.shape or h.size < 2:
        raise ValueError("need at least two (h, error) pairs")
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("h and error values must be positive")
    return linear_fit(np.log(h), np.log(e))


def linear_fit(x, y):
    """Slope and coefficient of determination of a least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(r2)


def energy_observer(disc: Discretization, forcing=None, second_order=False):
    """Observer for :func:`tidalfem.dynamics.run` recording energies."""
    if second_order:
        return lambda s: energy_second_order(s, disc, forcing).as_dict()
    return lambda s: energy_first_order(s, disc).as_dict()


def difference_norm(a: State, b: State, disc: Discretization) -> float:
    """``|u_a - u_b|_{1/H} + |eta_a - eta_b|``."""
    ua, ea = a.free()
    ub, eb = b.free()
    du, de = ua - ub, ea - eb
    return float(np.sqrt(du @ (disc.M @ du)) + np.sqrt(de @ (disc.M_W @ de)))
