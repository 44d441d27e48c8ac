"""Experiment drivers behind the command line.

Each ``cmd_*`` takes a resolved config dict (see :mod:`tidalfem.config`) and
an output directory, writes ``series.csv``, ``config.json``,
``summary.json`` and ``mesh.vtk`` there, and returns a :class:`RunSummary`.
Every metric in the summary is a closed-form function of the CSV files.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import config as cfgmod
from .diagnostics import (
    difference_norm,
    energy_first_order,
    energy_second_order,
    eta_error,
    fit_convergence_rate,
    linear_fit,
)
from .dynamics import (
    STEPPERS,
    Discretization,
    ManufacturedSolution,
    ModelParams,
    StepperConfig,
    initial_state,
    mms_forcing,
    mms_initial_state,
    random_state,
    run,
)
from .errors import ConfigError, ResourceError
from .expressions import scalar_function, vector_function
from .forcing import DivergenceForcing, PointwiseForcing, ZeroForcing
from .io import write_csv, write_frame_vtk, write_json, write_mesh_vtk, write_records
from .linalg import SolverConfig
from .mesh import build_mesh, mesh_statistics

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-12
MIN_FIT_R2 = 0.99


@dataclass
class RunSummary:
    experiment: str
    config: dict
    series_path: str
    metrics: dict
    wall_time: float
    files: list = field(default_factory=list)

    def as_dict(self):
        return {
            "experiment": self.experiment,
            "config": self.config,
            "series": self.series_path,
            "metrics": self.metrics,
            "wall_time_s": self.wall_time,
            "files": self.files,
        }


# -- builders ------------------------------------------------------------------


def make_mesh(cfg, level=None):
    m = dict(cfg["mesh"])
    kind = m.pop("kind")
    if level is not None:
        m["level"] = level
    if kind == "icosphere":
        return build_mesh(kind, level=m["level"], geometry_degree=m.get("geometry_degree") or 1)
    return build_mesh(kind, nx=m["nx"], ny=m["ny"])


def make_params(cfg) -> ModelParams:
    p = cfg["params"]
    return ModelParams(
        epsilon=p["epsilon"],
        beta=p["beta"],
        f=scalar_function(p["f"]),
        C=scalar_function(p["C"]),
        H=scalar_function(p["H"]),
        H_star=p.get("H_star", 1e-3),
    )


def make_stepper(cfg, scheme=None, dt=None) -> StepperConfig:
    s = cfg.get("solver", {})
    solver = SolverConfig(
        rel_tol=s.get("rel_tol", 1e-12),
        max_iters=s.get("max_iters"),
        method=s.get("method", "direct"),
        restart=s.get("restart", 50),
    )
    scheme = scheme or cfg.get("scheme", "midpoint")
    if scheme == "both":
        raise ConfigError("scheme 'both' is only accepted by the simulate experiment")
    return StepperConfig(dt=dt or cfg["dt"], scheme=scheme, solver=solver)


def _gain(value, g):
    if isinstance(value, str):
        table = {"gravity": g, "-gravity": -g}
        if value not in table:
            raise ConfigError(f"gain must be a number, 'gravity' or '-gravity', got {value!r}")
        return table[value]
    return float(value)


def make_forcing(cfg, params: ModelParams):
    spec = cfg.get("forcing") or {"kind": "zero"}
    kind = spec["kind"]
    if kind == "zero":
        return ZeroForcing()
    if kind == "pointwise":
        if "F" not in spec:
            raise ConfigError("pointwise forcing needs F")
        return PointwiseForcing(vector_function(spec["F"], time_dependent=True))
    if "potential" not in spec:
        raise ConfigError(f"{kind} forcing needs a potential")
    return DivergenceForcing(
        scalar_function(spec["potential"], time_dependent=True),
        _gain(spec.get("gain", "gravity"), params.gravity),
    )


def make_initial(cfg, disc):
    init = cfg.get("initial") or {}
    u = init.get("u")
    eta = init.get("eta")
    return initial_state(
        disc,
        u=vector_function(u) if u is not None else None,
        eta=scalar_function(eta) if eta is not None else None,
    )


def num_steps(t_end, dt):
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ConfigError(f"t_end={t_end} is not a whole number of steps of dt={dt}")
    return n


def _prepare(out_dir):
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ResourceError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _finish(experiment, cfg, out, metrics, t0, files):
    text = cfgmod.dumps(cfg)
    write_json(out / "config.json", cfg, text=text)
    summary = RunSummary(
        experiment=experiment,
        config=cfg,
        series_path="series.csv",
        metrics=metrics,
        wall_time=time.perf_counter() - t0,
        files=sorted({"series.csv", "config.json", "summary.json", *files}),
    )
    write_json(out / "summary.json", summary.as_dict())
    log.info("%s finished in %.2f s", experiment, summary.wall_time)
    return summary


def _figures_enabled(cfg):
    return bool(cfg.get("figures", True))


def _energy_columns(second_order):
    cols = ["t", "E1", "u_norm", "eta_norm", "div_u_norm"]
    return cols + ["E2"] if second_order else cols


def _energy_trajectory(state, disc, forcing, stepper, n_steps, second_order=False, extra=()):
    def report(s):
        if second_order:
            return energy_second_order(s, disc, forcing).as_dict()
        return energy_first_order(s, disc).as_dict()

    first = {"t": state.t, **report(state)}
    traj = run(state, disc, forcing, stepper, n_steps, observers=[report, *extra])
    return [first, *traj.records], traj.final


# -- metric helpers (pure functions of series columns) ---------------------


def max_relative_drift(E):
    E = np.asarray(E, dtype=float)
    if E.size == 0 or E[0] == 0:
        return 0.0
    return float(np.max(np.abs(E - E[0])) / abs(E[0]))


def trend(t, E):
    """Least-squares slope of ``E`` against ``t`` and its standard error."""
    t, E = np.asarray(t, dtype=float), np.asarray(E, dtype=float)
    if t.size < 3:
        return 0.0, 0.0
    r = stats.linregress(t, E)
    return float(r.slope), float(r.stderr)


def monotone_nonincreasing(E, slack=MONOTONE_SLACK):
    E = np.asarray(E, dtype=float)
    if E.size < 2:
        return True, 0.0
    worst = float(np.max(np.diff(E)))
    return bool(worst <= slack * abs(E[0])), worst


def log_linear_fit(t, y, window):
    """Decay rate ``-d log y / dt`` and R^2 over ``window``; None if undefined."""
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    lo, hi = window
    sel = (t >= lo - 1e-9) & (t <= hi + 1e-9)
    if sel.sum() < 2 or np.any(y[sel] <= 0):
        return None, None
    slope, r2 = linear_fit(t[sel], np.log(y[sel]))
    return -slope, r2


def time_average(t, y):
    """Arithmetic mean over completed steps (every row after the initial one)."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return 0.0
    return float(np.mean(y[1:])) if y.size > 1 else float(y[0])


# -- experiments -------------------------------------------------------------------


def cmd_energy(cfg, out_dir) -> RunSummary:
    """Unforced implicit-midpoint run; E1 should be conserved to round-off."""
    t0 = time.perf_counter()
    out = _prepare(out_dir)
    mesh = make_mesh(cfg)
    write_mesh_vtk(out / "mesh.vtk", mesh)
    disc = Discretization.build(mesh, cfg["order"], make_params(cfg))
    stepper = make_stepper(cfg)
    n = num_steps(cfg["t_end"], cfg["dt"])
    records, _ = _energy_trajectory(make_initial(cfg, disc), disc, None, stepper, n)
    cols = _energy_columns(False)
    write_records(out / "series.csv", records, cols)
    t = np.array([r["t"] for r in records])
    E = np.array([r["E1"] for r in records])
    slope, stderr = trend(t, E)
    metrics = {
        "scheme": stepper.scheme,
        "steps": n,
        "initial_E1": float(E[0]),
        "final_E1": float(E[-1]),
        "max_rel_E1_drift": max_relative_drift(E),
        "E1_trend_slope": slope,
        "E1_trend_stderr": stderr,
    }
    files = ["mesh.vtk"]
    if _figures_enabled(cfg):
        from .plotting import plot_series

        plot_series(out / "series.svg", t, {"E1": E}, ylabel="energy")
        files.append("series.svg")
    return _finish("energy", cfg, out, metrics, t0, files)


def cmd_damping(cfg, out_dir) -> RunSummary:
    """Unforced run with drag; both energies should decay monotonically."""
    t0 = time.perf_counter()
    out = _prepare(out_dir)
    mesh = make_mesh(cfg)
    write_mesh_vtk(out / "mesh.vtk", mesh)
    disc = Discretization.build(mesh, cfg["order"], make_params(cfg))
    stepper = make_stepper(cfg)
    n = num_steps(cfg["t_end"], cfg["dt"])
    records, _ = _energy_trajectory(make_initial(cfg, disc), disc, None, stepper, n,
                                    second_order=True)
    write_records(out / "series.csv", records, _energy_columns(True))
    t = np.array([r["t"] for r in records])
    E1 = np.array([r["E1"] for r in records])
    E2 = np.array([r["E2"] for r in records])
    mono1, worst1 = monotone_nonincreasing(E1)
    mono2, worst2 = monotone_nonincreasing(E2)
    rate, r2 = log_linear_fit(t, E1, cfg["fit_window"])
    metrics = {
        "scheme": stepper.scheme,
        "steps": n,
        "final_E1": float(E1[-1]),
        "monotone_E1": mono1,
        "max_E1_increase": worst1,
        "monotone_E2": mono2,
        "max_E2_increase": worst2,
        "decay_rate": rate,
        "fit_r2": r2,
        "fit_accepted": bool(r2 is not None and r2 >= MIN_FIT_R2 and rate > 1e-9),
    }
    files = ["mesh.vtk"]
    if _figures_enabled(cfg):
        from .plotting import plot_series

        plot_series(out / "series.svg", t, {"E1": E1, "E2": E2}, ylabel="energy", logy=True)
        files.append("series.svg")
    return _finish("damping", cfg, out, metrics, t0, files)


def _mms_level(cfg, level, dt, ms):
    mesh = make_mesh(cfg, level=level)
    params = make_params(cfg)
    disc = Discretization.build(mesh, cfg["order"], params)
    forcing = mms_forcing(ms, params)
    stepper = make_stepper(cfg, dt=dt)
    n = num_steps(cfg["t_end"], dt)
    state = mms_initial_state(disc, ms)

    def err(s):
        return {"err": eta_error(s.eta, ms.eta, s.t)}

    traj = run(state, disc, forcing, stepper, n, observers=[err])
    t = np.array([state.t, *traj.column("t")]) if n else np.array([state.t])
    e = np.array([err(state)["err"], *traj.column("err")]) if n else np.array([err(state)["err"]])
    return mesh, t, e


def cmd_mms(cfg, out_dir) -> RunSummary:
    """Convergence sweep against the manufactured solution."""
    t0 = time.perf_counter()
    out = _prepare(out_dir)
    ms = ManufacturedSolution(omega=cfg.get("omega", 2.0))
    levels = cfg["levels"]
    dt = cfg["dt"]
    h, avg, series = [], [], {}
    avg_half, series_half = [], {}
    t_grid = t_half = None
    for lvl in levels:
        log.info("mms level %d", lvl)
        mesh, t_grid, e = _mms_level(cfg, lvl, dt, ms)
        if lvl == levels[-1]:
            write_mesh_vtk(out / "mesh.vtk", mesh)
        h.append(mesh_statistics(mesh).h_max)
        series[f"eta_error_level{lvl}"] = e
        avg.append(time_average(t_grid, e))
        if cfg.get("check_dt", True):
            _, t_half, e2 = _mms_level(cfg, lvl, 0.5 * dt, ms)
            series_half[f"eta_error_level{lvl}"] = e2
            avg_half.append(time_average(t_half, e2))
    cols = ["t", *series]
    write_csv(out / "series.csv", cols, np.column_stack([t_grid, *series.values()]))
    files = ["mesh.vtk", "levels.csv"]
    table_cols = ["level", "h", "eta_error"]
    table = [list(levels), h, avg]
    if series_half:
        write_csv(out / "series_dt_half.csv", cols, np.column_stack([t_half, *series_half.values()]))
        files.append("series_dt_half.csv")
        rel = [abs(a - b) / a for a, b in zip(avg, avg_half)]
        table_cols += ["eta_error_dt_half", "rel_change"]
        table += [avg_half, rel]
    write_csv(out / "levels.csv", table_cols, np.column_stack(table))
    slope, r2 = fit_convergence_rate(h, avg) if len(levels) > 1 else (None, None)
    metrics = {
        "order": cfg["order"],
        "levels": list(levels),
        "h": h,
        "eta_error": avg,
        "slope": slope,
        "fit_r2": r2,
    }
    if series_half:
        metrics["eta_error_dt_half"] = avg_half
        metrics["max_dt_rel_change"] = float(max(rel))
    if _figures_enabled(cfg) and len(levels) > 1:
        from .plotting import plot_convergence

        plot_convergence(out / "convergence.svg", h, avg, slope)
        files.append("convergence.svg")
    return _finish("mms", cfg, out, metrics, t0, files)


def cmd_spinup(cfg, out_dir) -> RunSummary:
    """Two random initial states under the same forcing; their difference
    should decay to zero."""
    t0 = time.perf_counter()
    out = _prepare(out_dir)
    mesh = make_mesh(cfg)
    write_mesh_vtk(out / "mesh.vtk", mesh)
    params = make_params(cfg)
    disc = Discretization.build(mesh, cfg["order"], params)
    forcing = make_forcing(cfg, params)
    stepper = make_stepper(cfg)
    n = num_steps(cfg["t_end"], cfg["dt"])
    s1, s2 = (random_state(disc, seed) for seed in cfg["seeds"])
    t = [0.0]
    d = [difference_norm(s1, s2, disc)]
    step = STEPPERS[stepper.scheme]
    for _ in range(n):
        s1 = step(s1, disc, forcing, stepper)
        s2 = step(s2, disc, forcing, stepper)
        t.append(s1.t)
        d.append(difference_norm(s1, s2, disc))
    write_csv(out / "series.csv", ["t", "difference"], np.column_stack([t, d]))
    t, d = np.array(t), np.array(d)
    rate, r2 = log_linear_fit(t, d, cfg["fit_window"])
    metrics = {
        "scheme": stepper.scheme,
        "steps": n,
        "initial_difference": float(d[0]),
        "final_difference": float(d[-1]),
        "ratio": float(d[-1] / d[0]) if d[0] > 0 else 0.0,
        "tail_rate": rate,
        "tail_r2": r2,
    }
    files = ["mesh.vtk"]
    if _figures_enabled(cfg):
        from .plotting import plot_series

        plot_series(out / "series.svg", t, {"difference": d}, ylabel="difference norm", logy=True)
        files.append("series.svg")
    return _finish("spinup", cfg, out, metrics, t0, files)


def cmd_simulate(cfg, out_dir) -> RunSummary:
    """General run with configurable forcing, scheme and VTK snapshots."""
    t0 = time.perf_counter()
    out = _prepare(out_dir)
    mesh = make_mesh(cfg)
    write_mesh_vtk(out / "mesh.vtk", mesh)
    params = make_params(cfg)
    disc = Discretization.build(mesh, cfg["order"], params)
    forcing = make_forcing(cfg, params)
    n = num_steps(cfg["t_end"], cfg["dt"])
    scheme = cfg.get("scheme", "midpoint")
    schemes = ["midpoint", "symplectic"] if scheme == "both" else [scheme]
    every = cfg.get("vtk_every", 0)
    files = ["mesh.vtk"]
    columns, data, metrics = ["t"], [], {"steps": n, "schemes": schemes}
    t = None
    for k, name in enumerate(schemes):
        extra = []
        if every and k == 0:
            counter = {"n": 0}

            def frame(s, counter=counter):
                counter["n"] += 1
                if counter["n"] % every == 0:
                    fn = f"frame_{counter['n']:05d}.vtk"
                    write_frame_vtk(out / fn, s.u, s.eta, s.t)
                    files.append(fn)
                return {}

            extra.append(frame)
        state = make_initial(cfg, disc)
        if every and k == 0:
            write_frame_vtk(out / "frame_00000.vtk", state.u, state.eta, state.t)
            files.append("frame_00000.vtk")
        records, _ = _energy_trajectory(state, disc, forcing, make_stepper(cfg, scheme=name),
                                        n, extra=extra)
        t = np.array([r["t"] for r in records])
        suffix = f"_{name}" if len(schemes) > 1 else ""
        for c in _energy_columns(False)[1:]:
            columns.append(c + suffix)
            data.append(np.array([r[c] for r in records]))
        E = data[-4]
        metrics[f"final_E1{suffix}"] = float(E[-1])
        metrics[f"max_rel_E1_drift{suffix}"] = max_relative_drift(E)
        metrics[f"final_u_norm{suffix}"] = float(data[-3][-1])
        metrics[f"final_eta_norm{suffix}"] = float(data[-2][-1])
    write_csv(out / "series.csv", columns, np.column_stack([t, *data]))
    if _figures_enabled(cfg):
        from .plotting import plot_series

        e_cols = {c: d for c, d in zip(columns[1:], data) if c.startswith("E1")}
        plot_series(out / "series.svg", t, e_cols, ylabel="energy")
        files.append("series.svg")
    return _finish("simulate", cfg, out, metrics, t0, files)


COMMANDS = {
    "energy": cmd_energy,
    "damping": cmd_damping,
    "mms": cmd_mms,
    "spinup": cmd_spinup,
    "simulate": cmd_simulate,
}
