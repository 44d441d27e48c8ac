import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidalfem.assembly import load_divergence, load_vector_field
from tidalfem.diagnostics import energy_first_order
from tidalfem.dynamics import (
    Discretization,
    DGMassInverse,
    ManufacturedSolution,
    ModelParams,
    State,
    StepperConfig,
    initial_state,
    midpoint_system,
    mms_forcing,
    random_state,
    run,
    step_implicit_midpoint,
    step_symplectic_euler,
)
from tidalfem.errors import ValidationError
from tidalfem.fem import Field, build_space, perp, tangent_project
from tidalfem.forcing import DivergenceForcing, PointwiseForcing

from conftest import ENERGY_PARAMS, icosphere, rect, sphere_disc

XYZ = lambda x: x[:, 0] * x[:, 1] * x[:, 2]
MID = StepperConfig(0.01)
SYM = StepperConfig(0.01, "symplectic")


def energy(state, disc):
    return energy_first_order(state, disc).E1


def test_params_validation():
    with pytest.raises(ValidationError):
        ModelParams(epsilon=0)
    with pytest.raises(ValidationError):
        ModelParams(H_star=0)
    assert ModelParams(epsilon=0.1, beta=0.1).gravity == pytest.approx(10.0)


def test_depth_below_threshold_rejected():
    with pytest.raises(ValidationError):
        Discretization.build(icosphere(1), 1, ModelParams(H=lambda x: 0.5 + x[:, 0], H_star=0.1))


def test_negative_drag_rejected():
    with pytest.raises(ValidationError):
        Discretization.build(icosphere(1), 1, ModelParams(C=lambda x: x[:, 2]))


def test_space_pair_mismatch():
    m = icosphere(1)
    with pytest.raises(ValueError):
        Discretization(build_space(m, "RT", 1), build_space(m, "DG", 1), ModelParams())


def test_stepper_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(0.0)
    with pytest.raises(ValueError):
        StepperConfig(0.1, "rk4")


@pytest.mark.parametrize("level,order", [(2, 1), (1, 2)])
def test_midpoint_conserves_energy_one_step(level, order):
    disc = sphere_disc(level, order)
    s0 = random_state(disc, 3)
    s1 = step_implicit_midpoint(s0, disc, None, MID)
    assert abs(energy(s1, disc) - energy(s0, disc)) <= 1e-12 * energy(s0, disc)
    assert s1.t == pytest.approx(0.01)


def test_midpoint_conserves_energy_planar():
    disc = Discretization.build(rect(4, 4), 2, ModelParams(f=lambda x: 1 + x[:, 0]))
    s = initial_state(disc, eta=lambda x: np.cos(np.pi * x[:, 0]))
    E0 = energy(s, disc)
    traj = run(s, disc, None, StepperConfig(0.02), 50, [lambda st: {"E": energy(st, disc)}])
    assert np.abs(traj.column("E") - E0).max() <= 1e-11 * E0


@pytest.mark.parametrize("step,cfg", [(step_implicit_midpoint, MID), (step_symplectic_euler, SYM)])
def test_zero_state_stays_zero(step, cfg):
    disc = sphere_disc(2)
    s = step(State.zeros(disc), disc, None, cfg)
    assert np.all(s.u.coefficients == 0) and np.all(s.eta.coefficients == 0)


@pytest.mark.parametrize("mesh,order", [(rect(1, 1), 1), (rect(2, 2), 2)], ids=["rect11", "rect22"])
def test_midpoint_against_dense_lu(mesh, order):
    params = ModelParams(epsilon=0.3, beta=0.2, f=lambda x: 1 + x[:, 0], C=0.7,
                         H=lambda x: 1 + 0.2 * x[:, 1])
    disc = Discretization.build(mesh, order, params)
    s0 = random_state(disc, 11)
    F = PointwiseForcing(lambda x, t: np.column_stack([np.cos(t) + x[:, 1], x[:, 0] * t]))
    dt, g = 0.1, params.gravity
    s1 = step_implicit_midpoint(s0, disc, F, StepperConfig(dt))
    # dense oracle of the same trapezoidal update
    M, R, K, B, MW = (A.toarray() for A in (disc.M, disc.R, disc.K, disc.B, disc.M_W))
    u0, e0 = s0.free()
    b = disc.rhs(F, dt / 2)
    A = np.block([[M + dt / 2 * (R + K), -dt / 2 * g * B.T], [dt / 2 * B, MW]])
    rhs = np.concatenate([(M - dt / 2 * (R + K)) @ u0 + dt / 2 * g * B.T @ e0 + dt * b,
                          MW @ e0 - dt / 2 * B @ u0])
    x = np.linalg.solve(A, rhs)
    u1, e1 = s1.free()
    np.testing.assert_allclose(np.concatenate([u1, e1]), x, atol=1e-9)


def test_symplectic_matches_dense_formula():
    disc = sphere_disc(1)
    s0 = random_state(disc, 2)
    dt, g = 0.01, disc.params.gravity
    s1 = step_symplectic_euler(s0, disc, None, SYM)
    M, R, K, B, MW = (A.toarray() for A in (disc.M, disc.R, disc.K, disc.B, disc.M_W))
    u0, e0 = s0.free()
    u1 = np.linalg.solve(M + dt / 2 * (R + K), (M - dt / 2 * (R + K)) @ u0 + dt * g * B.T @ e0)
    e1 = e0 - dt * np.linalg.solve(MW, B @ u1)
    np.testing.assert_allclose(s1.free()[0], u1, atol=1e-11)
    np.testing.assert_allclose(s1.free()[1], e1, atol=1e-11)


@pytest.mark.parametrize("level,order", [(1, 1), (1, 2)])
def test_dg_mass_inverse_per_cell_oracle(level, order):
    W = build_space(icosphere(level, order), "DG", order - 1)
    from tidalfem.assembly import assemble_mass_w

    MW = assemble_mass_w(W).toarray()
    b = np.random.default_rng(0).normal(size=W.dim)
    x = DGMassInverse(W) @ b
    for c in range(W.mesh.num_cells):
        d = W.cell_dofs[c]
        np.testing.assert_allclose(x[d], np.linalg.solve(MW[np.ix_(d, d)], b[d]), atol=1e-13)


def test_symplectic_drift_halves_with_dt():
    disc = sphere_disc(2)
    s0 = initial_state(disc, eta=XYZ)
    E0 = energy(s0, disc)
    drift = []
    for dt in (0.01, 0.005):
        n = int(round(10 / dt))
        tr = run(s0, disc, None, StepperConfig(dt, "symplectic"), n,
                 [lambda s: {"E": energy(s, disc)}])
        drift.append(np.abs(tr.column("E") - E0).max() / E0)
    # first-order scheme: the energy error bound shrinks linearly with dt
    assert 1.7 <= drift[0] / drift[1] <= 2.3
    assert drift[0] < 0.1


def test_symplectic_no_secular_growth():
    disc = sphere_disc(2)
    s0 = initial_state(disc, eta=XYZ)
    tr = run(s0, disc, None, SYM, 1000, [lambda s: {"E": energy(s, disc)}])
    t, E = tr.times, tr.column("E")
    first, last = E[t <= 2].max(), E[t >= 8].max()
    assert last <= first * 1.001


def test_run_zero_steps():
    disc = sphere_disc(1)
    s = random_state(disc, 0)
    tr = run(s, disc, None, MID, 0, [lambda st: {"E": 1.0}])
    assert tr.records == [] and tr.final is s
    assert tr.times.size == 0


def test_run_negative_steps():
    with pytest.raises(ValueError):
        run(random_state(sphere_disc(1), 0), sphere_disc(1), None, MID, -1)


def test_run_deterministic():
    disc = sphere_disc(2)
    s = random_state(disc, 5)
    F = DivergenceForcing(lambda x, t: np.sin(t) * XYZ(x), gain=disc.params.gravity)
    obs = [lambda st: {"E": energy(st, disc), "eta0": st.eta.coefficients[0]}]
    a = run(s, disc, F, MID, 20, obs)
    b = run(s, disc, F, MID, 20, obs)
    assert a.records == b.records
    np.testing.assert_array_equal(a.final.u.coefficients, b.final.u.coefficients)


def test_energy_run_constant():
    disc = sphere_disc(2)
    s = initial_state(disc, eta=XYZ)
    tr = run(s, disc, None, MID, 100, [lambda st: {"E": energy(st, disc)}])
    E0 = energy(s, disc)
    assert np.abs(tr.column("E") - E0).max() <= 1e-10 * E0
    assert tr.times[-1] == pytest.approx(1.0)


def test_damping_monotone_per_step():
    disc = sphere_disc(2, C=0.5)
    s = random_state(disc, 1)
    tr = run(s, disc, None, StepperConfig(0.05), 100, [lambda st: {"E": energy(st, disc)}])
    E = np.concatenate([[energy(s, disc)], tr.column("E")])
    assert np.all(np.diff(E) <= 1e-12 * E[0])
    assert E[-1] < 0.5 * E[0]


@pytest.mark.parametrize("scheme", ["midpoint", "symplectic"])
def test_superposition(scheme):
    disc = sphere_disc(1, C=0.3)
    cfg = StepperConfig(0.02, scheme)
    g = disc.params.gravity
    F1 = DivergenceForcing(lambda x, t: np.sin(t) * XYZ(x), gain=g)
    F2 = PointwiseForcing(lambda x, t: np.column_stack([x[:, 1], -x[:, 0], t + 0 * x[:, 0]]))
    a, b = random_state(disc, 1), random_state(disc, 2)
    ab = State.from_free(disc, a.free()[0] + b.free()[0], a.free()[1] + b.free()[1], 0.0)
    ra = run(a, disc, F1, cfg, 25).final
    rb = run(b, disc, F2, cfg, 25).final
    rab = run(ab, disc, F1 + F2, cfg, 25).final
    lhs = np.concatenate(rab.free())
    rhs = np.concatenate(ra.free()) + np.concatenate(rb.free())
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_random_state_zero_mean_and_range():
    disc = sphere_disc(2)
    s = random_state(disc, 0)
    u, eta = s.free()
    assert np.all(np.abs(u) <= 1)
    assert abs(np.ones(disc.n_eta) @ (disc.M_W @ eta)) <= 1e-13
    np.testing.assert_array_equal(u, random_state(disc, 0).free()[0])


def test_state_requires_same_mesh():
    a, b = sphere_disc(1), sphere_disc(2)
    with pytest.raises(ValueError):
        State(Field.zeros(a.V), Field.zeros(b.W))


def test_pressure_null_detected_on_closed_rect():
    # no-flux walls: B^T 1 = 0, so constants are again in the pressure kernel
    disc = Discretization.build(rect(3, 3), 1, ModelParams())
    assert disc.pressure_null is not None
    assert np.abs(disc.B.T @ disc.pressure_null).max() <= 1e-14


def test_pressure_null_detected_on_sphere():
    disc = sphere_disc(1)
    assert disc.pressure_null is not None


# -- manufactured solution -----------------------------------------------------------


def _fd_surface_div(fn, x, h=1e-6):
    # central differences of the ambient field, tangential trace
    n = x / np.linalg.norm(x, axis=1, keepdims=True)
    grad = np.empty((len(x), 3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        grad[:, :, k] = (fn(x + e) - fn(x - e)) / (2 * h)
    return np.trace(grad, axis1=1, axis2=2) - np.einsum("ni,nij,nj->n", n, grad, n)


@pytest.mark.parametrize("omega", [2.0, 12.0, 0.5])
def test_manufactured_continuity_by_finite_differences(omega):
    ms = ManufacturedSolution(omega)
    x = np.random.default_rng(0).normal(size=(20, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    for t in (0.0, 0.2, 1.1):
        div = _fd_surface_div(lambda p: ms.u(p, t), x)
        np.testing.assert_allclose(ms.eta_t(x, t) + div, 0, atol=1e-8)
        np.testing.assert_allclose(div, ms.div_u(x, t), atol=1e-8)


def test_manufactured_velocity_tangent():
    ms = ManufacturedSolution()
    x = np.random.default_rng(1).normal(size=(20, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    assert np.abs(np.einsum("nd,nd->n", ms.u(x, 0.3), x)).max() <= 1e-15


def test_manufactured_time_derivative():
    ms = ManufacturedSolution(2.0)
    x = np.random.default_rng(2).normal(size=(5, 3))
    h = 1e-6
    np.testing.assert_allclose(ms.u_t(x, 0.4), (ms.u(x, 0.4 + h) - ms.u(x, 0.4 - h)) / (2 * h),
                               atol=1e-8)
    np.testing.assert_allclose(ms.eta_t(x, 0.4), (ms.eta(x, 0.4 + h) - ms.eta(x, 0.4 - h)) / (2 * h),
                               atol=1e-8)


def _mms_params(**kw):
    return ModelParams(**dict(dict(epsilon=0.1, beta=0.1, f=1.0, C=1000.0, H=1.0), **kw))


def test_mms_forcing_matches_independent_residual():
    params = _mms_params(f=lambda x: x[:, 2], H=lambda x: 1 + 0.1 * x[:, 0] ** 2, C=3.0)
    disc = Discretization.build(icosphere(2), 1, params)
    ms = ManufacturedSolution(2.0)
    V, q = disc.V, disc.V.quad
    t = 0.0
    J, n = q.geom.J, q.geom.normal
    u = tangent_project(ms.u(q.xs, t), J)
    ut = tangent_project(ms.u_t(q.xs, t), J)
    X = q.xs
    H = (1 + 0.1 * X[..., 0] ** 2)[..., None]
    f = X[..., 2][..., None]
    pointwise = ut / H + f / (0.1 * H) * np.cross(n, u) + 3.0 * u / H
    expected = load_vector_field(V, pointwise) - params.gravity * load_divergence(V, ms.eta(X, t))
    got = mms_forcing(ms, params).load(V, t)
    assert np.abs(got - expected).max() <= 1e-9 * np.abs(expected).max()


def test_mms_forcing_pure_pressure_when_static():
    params = _mms_params(f=0.0, C=0.0)
    disc = Discretization.build(icosphere(1), 1, params)
    ms = ManufacturedSolution(0.0)
    q = disc.V.quad
    got = mms_forcing(ms, params).load(disc.V, 0.5)
    expected = -params.gravity * load_divergence(disc.V, ms.eta(q.xs, 0.5))
    np.testing.assert_allclose(got, expected, atol=1e-13)


def test_mms_forcing_linear_in_drag():
    ms = ManufacturedSolution(2.0)
    mesh = icosphere(1)
    V = build_space(mesh, "RT", 1)
    b = [mms_forcing(ms, _mms_params(C=c)).load(V, 0.3) for c in (0.0, 5.0, 10.0)]
    np.testing.assert_allclose(b[2] - b[1], b[1] - b[0], atol=1e-12)
    assert np.abs(b[1] - b[0]).max() > 0


def test_perp_is_rotation():
    v = np.array([[1.0, 2.0]])
    np.testing.assert_array_equal(perp(v), [[-2.0, 1.0]])
    n = np.array([[0.0, 0.0, 1.0]])
    np.testing.assert_allclose(perp(np.array([[1.0, 2.0, 0.0]]), n), [[-2.0, 1.0, 0.0]])


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.001, 0.2))
def test_midpoint_energy_property(seed, dt):
    disc = sphere_disc(1)
    s0 = random_state(disc, seed)
    s1 = step_implicit_midpoint(s0, disc, None, StepperConfig(dt))
    E0 = energy(s0, disc)
    assert abs(energy(s1, disc) - E0) <= 1e-11 * E0


def test_midpoint_system_shape():
    disc = sphere_disc(1)
    op = midpoint_system(disc, 0.1)
    assert op.shape == (disc.n_u + disc.n_eta,) * 2
