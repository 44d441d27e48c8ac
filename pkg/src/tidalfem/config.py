"""Experiment configuration: defaults, JSON schema and overrides.

A config is a plain JSON object.  Resolution order is: experiment defaults,
then the config file, then ``--override key=value`` pairs (dotted keys reach
into nested objects).  The resolved dict is validated against ``SCHEMA``.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError

EXPERIMENTS = ("energy", "damping", "mms", "spinup", "simulate")

_number_or_expr = {"type": ["number", "string"]}

SCHEMA = {
    "type": "object",
    "required": ["experiment", "mesh", "order", "params", "dt", "t_end"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "mesh": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["icosphere", "rect"]},
                "level": {"type": "integer", "minimum": 0},
                "geometry_degree": {"type": ["integer", "null"], "enum": [1, 2, None]},
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "order": {"enum": [1, 2]},
        "params": {
            "type": "object",
            "required": ["epsilon", "beta", "f", "C", "H"],
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "f": _number_or_expr,
                "C": _number_or_expr,
                "H": _number_or_expr,
                "H_star": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "t_end": {"type": "number", "minimum": 0},
        "scheme": {"enum": ["midpoint", "symplectic", "both"]},
        "solver": {
            "type": "object",
            "properties": {
                "method": {"enum": ["cg", "gmres", "direct"]},
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": ["integer", "null"], "minimum": 1},
                "restart": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "levels": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "omega": {"type": "number"},
        "check_dt": {"type": "boolean"},
        "fit_window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "initial": {
            "type": "object",
            "properties": {
                "u": {"type": ["array", "null"], "items": _number_or_expr},
                "eta": {"type": ["number", "string", "null"]},
            },
            "additionalProperties": False,
        },
        "forcing": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "pointwise", "divergence", "tidal"]},
                "F": {"type": "array", "items": _number_or_expr},
                "potential": _number_or_expr,
                "gain": {"type": ["number", "string"]},
            },
            "additionalProperties": False,
        },
        "vtk_every": {"type": "integer", "minimum": 0},
        "figures": {"type": "boolean"},
    },
    "additionalProperties": False,
}

_SPHERE_H = "1 + 0.1*exp(-x**2)"

_COMMON = {
    "mesh": {"kind": "icosphere", "level": 2, "geometry_degree": None},
    "order": 1,
    "params": {"epsilon": 0.1, "beta": 0.1, "f": 1.0, "C": 0.0, "H": _SPHERE_H, "H_star": 0.5},
    "dt": 0.01,
    "t_end": 1.0,
    "scheme": "midpoint",
    "solver": {"method": "direct", "rel_tol": 1e-12, "max_iters": None, "restart": 50},
    "seed": 0,
    "figures": True,
}

_DEFAULTS = {
    "energy": {"initial": {"u": None, "eta": "x*y*z"}},
    "damping": {
        "params": {"C": 0.01},
        "dt": 0.05,
        "t_end": 50.0,
        "fit_window": [10.0, 50.0],
        "initial": {"u": None, "eta": "x*y*z"},
    },
    "mms": {
        "params": {"f": 1.0, "C": 1000.0, "H": 1.0},
        "dt": 1e-3,
        "t_end": 0.3,
        "omega": 2.0,
        "levels": None,
        "check_dt": True,
    },
    "spinup": {
        "params": {"C": 10.0},
        "t_end": 10.0,
        "seeds": [0, 1],
        "fit_window": [5.0, 10.0],
        "forcing": {"kind": "tidal", "potential": "sin(t)*x*y*z", "gain": "gravity"},
    },
    "simulate": {
        "initial": {"u": None, "eta": "x*y*z"},
        "forcing": {"kind": "zero"},
        "vtk_every": 0,
    },
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def defaults(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cfg = _merge(_COMMON, _DEFAULTS[experiment])
    cfg["experiment"] = experiment
    return cfg


def parse_override(text: str):
    """``"a.b=value"`` -> (["a", "b"], value); values are parsed as JSON
    when possible and kept as strings otherwise."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_override(cfg: dict, path, value):
    node = cfg
    for k in path[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[path[-1]] = value


def resolve(experiment: str, file_config: dict | None = None, overrides=()) -> dict:
    """Defaults <- file <- overrides, then fill derived values and validate."""
    cfg = defaults(experiment)
    if file_config:
        if file_config.get("experiment", experiment) != experiment:
            raise ConfigError(
                f"config file is for {file_config['experiment']!r}, not {experiment!r}"
            )
        cfg = _merge(cfg, file_config)
    for item in overrides:
        apply_override(cfg, *parse_override(item))
    if cfg["mesh"].get("kind") == "icosphere" and cfg["mesh"].get("geometry_degree") is None:
        cfg["mesh"]["geometry_degree"] = cfg.get("order", 1)
    if experiment == "mms" and cfg.get("levels") is None:
        cfg["levels"] = [1, 2, 3, 4] if cfg.get("order") == 1 else [1, 2, 3]
    validate(cfg)
    return cfg


def validate(cfg: dict):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    mesh = cfg["mesh"]
    if mesh["kind"] == "icosphere" and "level" not in mesh:
        raise ConfigError("icosphere mesh needs a level")
    if mesh["kind"] == "rect" and not ("nx" in mesh and "ny" in mesh):
        raise ConfigError("rect mesh needs nx and ny")
    if cfg["experiment"] in ("mms", "spinup") and mesh["kind"] != "icosphere":
        raise ConfigError(f"{cfg['experiment']} runs on the sphere only")


def load_file(path) -> dict:
    try:
        with open(Path(path)) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    return data


def dumps(cfg: dict) -> str:
    """Canonical serialization used for every config echo."""
    return json.dumps(cfg, indent=2, sort_keys=True)
