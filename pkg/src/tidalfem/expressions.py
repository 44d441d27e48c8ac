"""Closed-form coefficient expressions from config files.

Expressions are Python arithmetic over ``x, y, z, t`` and a fixed set of
numpy functions, e.g. ``"1 + 0.1*exp(-x**2)"``.  They are checked against a
whitelist of AST nodes before compilation.
"""

from __future__ import annotations

import ast
import numbers

import numpy as np

from .errors import ConfigError

_FUNCS = {
    name: getattr(np, name)
    for name in ("exp", "sin", "cos", "tan", "sqrt", "log", "tanh", "sinh", "cosh",
                 "arcsin", "arccos", "arctan", "abs")
}
_CONSTS = {"pi": np.pi, "e": np.e}
_VARS = ("x", "y", "z", "t")
_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
)


def _compile(text: str):
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigError(f"disallowed syntax in expression {text!r}")
        if isinstance(node, ast.Name) and node.id not in (*_FUNCS, *_CONSTS, *_VARS):
            raise ConfigError(f"unknown name {node.id!r} in expression {text!r}")
        if isinstance(node, ast.Call) and not (
            isinstance(node.func, ast.Name) and node.func.id in _FUNCS
        ):
            raise ConfigError(f"disallowed call in expression {text!r}")
    return compile(tree, "<expr>", "eval")


def _namespace(x, t):
    x = np.asarray(x)
    z = x[..., 2] if x.shape[-1] > 2 else np.zeros(x.shape[:-1])
    return {**_FUNCS, **_CONSTS, "x": x[..., 0], "y": x[..., 1], "z": z, "t": t}


def scalar_function(spec, time_dependent=False):
    """Callable ``f(points)`` (or ``f(points, t)``) from a number or string."""
    if isinstance(spec, bool):
        raise ConfigError(f"expected a number or expression, got {spec!r}")
    if isinstance(spec, numbers.Real):
        c = float(spec)
        if time_dependent:
            return lambda x, t=0.0: np.full(np.shape(x)[:-1], c)
        return lambda x: np.full(np.shape(x)[:-1], c)
    if not isinstance(spec, str):
        raise ConfigError(f"expected a number or expression, got {spec!r}")
    code = _compile(spec)

    def fn(x, t=0.0):
        val = eval(code, {"__builtins__": {}}, _namespace(x, t))
        return np.broadcast_to(np.asarray(val, dtype=float), np.shape(x)[:-1])

    if time_dependent:
        return fn
    return lambda x: fn(x)


def vector_function(specs, time_dependent=False):
    """Callable returning (N, d) from a list of component expressions."""
    comps = [scalar_function(s, True) for s in specs]

    def fn(x, t=0.0):
        d = np.shape(x)[-1]
        vals = [c(x, t) for c in comps][:d]
        vals += [np.zeros(np.shape(x)[:-1])] * (d - len(vals))
        return np.stack(vals, axis=-1)

    if time_dependent:
        return fn
    return lambda x: fn(x)
