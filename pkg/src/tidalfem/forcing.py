"""Momentum forcing functionals ``v -> (F(t), v)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import load_divergence, load_vector_field
from .fem.space import FunctionSpace


class ForcingSpec:
    """Base class; subclasses return the full-length load vector."""

    def load(self, V: FunctionSpace, t: float) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other):
        return CompositeForcing([self, other])


@dataclass
class ZeroForcing(ForcingSpec):
    def load(self, V, t):
        return np.zeros(V.dim)


@dataclass
class PointwiseForcing(ForcingSpec):
    """``(F, v)`` for an ambient vector field ``F(x, t)`` of shape (N, d)."""

    F: Callable

    def load(self, V, t):
        q = V.quad
        vals = np.asarray(self.F(q.xs.reshape(-1, V.mesh.dim), t), dtype=float)
        return load_vector_field(V, vals.reshape(q.xs.shape))


@dataclass
class DivergenceForcing(ForcingSpec):
    """``gain * (potential(x, t), div v)``.

    Covers tidal forcing by an equilibrium-tide potential and the
    bathymetric right-hand side ``-g (eta_bar, div v)`` with ``gain = -g``.
    """

    potential: Callable
    gain: float = 1.0

    def load(self, V, t):
        q = V.quad
        pts = q.xs.reshape(-1, V.mesh.dim)
        vals = np.broadcast_to(np.asarray(self.potential(pts, t), dtype=float), (len(pts),))
        return self.gain * load_divergence(V, vals.reshape(q.dx.shape))


@dataclass
class SeparableForcing(ForcingSpec):
    """``amplitude(t) * base`` where ``base`` is assembled once per space."""

    base: ForcingSpec
    amplitude: Callable
    _cache: dict = field(default_factory=dict, repr=False)

    def load(self, V, t):
        key = id(V)
        if key not in self._cache:
            self._cache[key] = (V, self.base.load(V, 0.0))
        return self.amplitude(t) * self._cache[key][1]


@dataclass
class CompositeForcing(ForcingSpec):
    parts: list

    def load(self, V, t):
        return sum((p.load(V, t) for p in self.parts), np.zeros(V.dim))
