from functools import lru_cache

import numpy as np
import pytest

from tidalfem.dynamics import Discretization, ModelParams
from tidalfem.mesh import build_icosphere, build_rect_mesh


@lru_cache(maxsize=None)
def icosphere(level, degree=1):
    return build_icosphere(level, degree)


@lru_cache(maxsize=None)
def rect(nx, ny):
    return build_rect_mesh(nx, ny)


def bump_depth(x):
    return 1.0 + 0.1 * np.exp(-x[..., 0] ** 2)


ENERGY_PARAMS = dict(epsilon=0.1, beta=0.1, f=1.0, C=0.0, H=bump_depth, H_star=0.5)


@lru_cache(maxsize=None)
def sphere_disc(level=2, order=1, **overrides):
    kw = dict(ENERGY_PARAMS, **overrides)
    return Discretization.build(icosphere(level, order), order, ModelParams(**kw))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting ------------------------------------------------------------

ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    """Store and print one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
