from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from phi_operators import relativistic
from periodic_solver import Problem
from timescale import GridFunction, Mesh, TimeScale

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def jump_timescale() -> TimeScale:
    """3-periodic: [0, 1] ∪ {2}."""
    return TimeScale.from_spec(3.0, [[0.0, 1.0], 2.0])


def hybrid_timescale() -> TimeScale:
    return TimeScale.from_spec(0.5, [[0.0, 1 / 8], 3 / 16, 1 / 4, [5 / 16, 3 / 8], [7 / 16, 0.5]])


def discrete_timescale() -> TimeScale:
    return TimeScale.discrete(8.0, range(8))


@pytest.fixture
def jump_ts() -> TimeScale:
    return jump_timescale()


@pytest.fixture
def jump_mesh(jump_ts: TimeScale) -> Mesh:
    return Mesh.build(jump_ts, 0.5)


@pytest.fixture
def jump_x(jump_mesh: Mesh) -> GridFunction:
    """x(t) = t on [0, 1], x(2) = 2, extended 3-periodically."""
    return GridFunction.sample(jump_mesh, lambda t: t)


@pytest.fixture(params=["real", "discrete", "hybrid"])
def any_mesh(request: pytest.FixtureRequest) -> Mesh:
    if request.param == "real":
        return Mesh.build(TimeScale.continuous(2.0), 2.0 / 64)
    if request.param == "discrete":
        return Mesh.build(discrete_timescale())
    return Mesh.build(jump_timescale(), 0.125)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def pendulum(c: float = 1.0, period: float = 0.9 * math.pi, friction: float = 0.1, forcing: float = 0.0,
             steps: int = 256) -> Problem:
    ts = TimeScale.continuous(period)
    omega = 2 * math.pi / period
    return Problem.build(
        ts,
        relativistic(c),
        lambda x: np.full(np.shape(x), friction),
        np.sin,
        lambda t: forcing * np.cos(omega * t),
        dt_max=period / steps,
    )


PENDULUM_ALPHAS = [-0.5 * math.pi, 0.5 * math.pi, 1.5 * math.pi, 2.5 * math.pi, 3.5 * math.pi]
