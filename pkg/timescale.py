"""Periodic time scales, sampling meshes and Δ-calculus on periodic grid functions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigurationError, PreconditionError, TimeScaleDomainError

logger = logging.getLogger(__name__)

MEMBERSHIP_RTOL = 1e-9
DEFAULT_STEPS_PER_PERIOD = 256


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def start(self) -> float:
        return self.lo

    @property
    def stop(self) -> float:
        return self.hi

    def describe(self) -> List[float]:
        return [self.lo, self.hi]

    def __str__(self) -> str:
        return f"[{self.lo:g}, {self.hi:g}]"


@dataclass(frozen=True)
class Point:
    t: float

    @property
    def start(self) -> float:
        return self.t

    @property
    def stop(self) -> float:
        return self.t

    def describe(self) -> float:
        return self.t

    def __str__(self) -> str:
        return f"{{{self.t:g}}}"


Cell = Union[Interval, Point]
CellSpec = Union[Cell, float, Sequence[float]]


@dataclass(frozen=True)
class TimeScale:
    """One period [0, T) of a T-periodic time scale as a canonical list of cells.

    An interval whose upper end equals T continues right-densely into the
    next period, whose first point is 0.
    """

    period: float
    cells: Tuple[Cell, ...]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.period) and self.period > 0):
            raise ConfigurationError(f"period must be a positive number, got {self.period!r}")
        if not self.cells:
            raise ConfigurationError("a time scale needs at least one cell")
        if self.cells[0].start != 0.0:
            raise ConfigurationError("0 must belong to the time scale (first cell has to start at 0)")
        for cell in self.cells:
            if isinstance(cell, Interval) and not cell.lo < cell.hi:
                raise ConfigurationError(f"interval {cell} is empty")
            if cell.stop > self.period or (isinstance(cell, Point) and cell.t >= self.period):
                raise ConfigurationError(f"cell {cell} leaves one period [0, {self.period:g})")
        for prev, cell in zip(self.cells, self.cells[1:]):
            if cell.start <= prev.stop:
                raise ConfigurationError(f"cells {prev} and {cell} overlap or touch; use TimeScale.from_spec")
            if isinstance(prev, Interval) and prev.hi >= self.period:
                raise ConfigurationError(f"interval {prev} reaches the period and must be the last cell")

    @classmethod
    def from_spec(cls, period: float, cells: Iterable[CellSpec]) -> "TimeScale":
        """Normalize pairs/scalars into canonical sorted, merged cells."""
        period = float(period)
        if not (math.isfinite(period) and period > 0):
            raise ConfigurationError(f"period must be a positive number, got {period!r}")
        tol = MEMBERSHIP_RTOL * period
        raw: List[Cell] = []
        for item in cells:
            if isinstance(item, (Interval, Point)):
                cell: Cell = item
            elif isinstance(item, (list, tuple)):
                if len(item) != 2:
                    raise ConfigurationError(f"interval cells are [lo, hi] pairs, got {list(item)!r}")
                lo, hi = float(item[0]), float(item[1])
                if hi < lo - tol:
                    raise ConfigurationError(f"interval [{lo:g}, {hi:g}] has lo > hi")
                cell = Point(lo) if hi - lo <= tol else Interval(lo, hi)
            else:
                cell = Point(float(item))
            raw.append(_snap(cell, period, tol))
        if not raw:
            raise ConfigurationError("a time scale needs at least one cell")

        merged: List[Cell] = []
        for cell in sorted(raw, key=lambda c: (c.start, c.stop)):
            if merged and cell.start <= merged[-1].stop + tol:
                prev = merged[-1]
                lo, hi = prev.start, max(prev.stop, cell.stop)
                merged[-1] = Interval(lo, hi) if hi - lo > tol else Point(lo)
            else:
                merged.append(cell)
        if merged[0].start > 0.0:
            raise ConfigurationError(
                f"0 must belong to the time scale; first cell is {merged[0]}"
            )
        return cls(period, tuple(merged))

    @classmethod
    def continuous(cls, period: float) -> "TimeScale":
        return cls(float(period), (Interval(0.0, float(period)),))

    @classmethod
    def discrete(cls, period: float, points: Iterable[float]) -> "TimeScale":
        return cls.from_spec(period, [float(p) for p in points])

    @property
    def tolerance(self) -> float:
        return MEMBERSHIP_RTOL * self.period

    def reduce(self, t: float) -> float:
        r = float(t) % self.period
        if r > self.period - self.tolerance:
            r = 0.0
        return r

    def nearest_cell(self, t: float) -> str:
        r = self.reduce(t)

        def distance(cell: Cell) -> float:
            if cell.start <= r <= cell.stop:
                return 0.0
            d = min(abs(r - cell.start), abs(r - cell.stop))
            return min(d, self.period - d)

        return str(min(self.cells, key=distance))

    def locate(self, t: float) -> Tuple[int, float]:
        """Index of the cell holding t and t reduced/snapped into that cell."""
        r = self.reduce(t)
        tol = self.tolerance
        for index, cell in enumerate(self.cells):
            if cell.start - tol <= r <= cell.stop + tol:
                return index, min(max(r, cell.start), cell.stop)
        raise TimeScaleDomainError(t, self.nearest_cell(r))

    def contains(self, t: float) -> bool:
        try:
            self.locate(t)
        except TimeScaleDomainError:
            return False
        return True

    def sigma(self, t: float) -> float:
        index, r = self.locate(t)
        cell = self.cells[index]
        if isinstance(cell, Interval) and (r < cell.hi - self.tolerance or cell.hi >= self.period):
            return r
        if index + 1 < len(self.cells):
            return self.cells[index + 1].start
        return self.period

    def graininess(self, t: float) -> float:
        _, r = self.locate(t)
        return self.sigma(r) - r

    def describe(self) -> Dict[str, Any]:
        return {"period": self.period, "cells": [cell.describe() for cell in self.cells]}

    def scaled(self, factor: float) -> "TimeScale":
        cells = [cell.describe() for cell in self.cells]
        scaled: List[CellSpec] = [
            [c[0] * factor, c[1] * factor] if isinstance(c, list) else c * factor for c in cells
        ]
        return TimeScale.from_spec(self.period * factor, scaled)


def _snap(cell: Cell, period: float, tol: float) -> Cell:
    if cell.start < -tol or cell.stop > period + tol:
        raise ConfigurationError(f"cell {cell} lies outside one period [0, {period:g}]")
    if isinstance(cell, Point):
        t = 0.0 if (abs(cell.t) <= tol or abs(cell.t - period) <= tol) else cell.t
        return Point(t)
    lo = 0.0 if abs(cell.lo) <= tol else cell.lo
    hi = period if abs(cell.hi - period) <= tol else cell.hi
    if lo >= period:
        return Point(0.0)
    return Interval(lo, hi)


def sigma(ts: TimeScale, t: float) -> float:
    """Forward jump σ(t) = inf{s ∈ 𝕋 : s > t}; right-dense points map to themselves."""
    return ts.sigma(t)


def graininess(ts: TimeScale, t: float) -> float:
    return ts.graininess(t)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Sample nodes of one period; node i starts a dense or a scattered segment of length steps[i]."""

    timescale: TimeScale
    dt_max: float
    nodes: np.ndarray
    steps: np.ndarray
    dense: np.ndarray

    @classmethod
    def build(cls, timescale: TimeScale, dt_max: Optional[float] = None) -> "Mesh":
        period = timescale.period
        dt = float(dt_max) if dt_max else period / DEFAULT_STEPS_PER_PERIOD
        if not (math.isfinite(dt) and dt > 0):
            raise ConfigurationError(f"mesh spacing must be positive, got {dt_max!r}")
        nodes: List[float] = []
        dense: List[bool] = []
        for cell in timescale.cells:
            if isinstance(cell, Interval):
                width = cell.hi - cell.lo
                pieces = max(1, math.ceil(width / dt - 1e-9))
                nodes.extend(cell.lo + width * k / pieces for k in range(pieces))
                dense.extend([True] * pieces)
                if cell.hi < period:
                    nodes.append(cell.hi)
                    dense.append(False)
            else:
                nodes.append(cell.t)
                dense.append(False)
        node_array = np.array(nodes, dtype=float)
        steps = np.diff(np.append(node_array, period))
        mesh = cls(timescale, dt, node_array, steps, np.array(dense, dtype=bool))
        for array in (mesh.nodes, mesh.steps, mesh.dense):
            array.setflags(write=False)
        logger.debug("mesh with %d nodes (dt_max=%g) on %d cells", mesh.size, dt, len(timescale.cells))
        return mesh

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def period(self) -> float:
        return self.timescale.period

    @cached_property
    def succ(self) -> np.ndarray:
        return np.roll(np.arange(self.size), -1)

    @cached_property
    def start_weights(self) -> np.ndarray:
        return np.where(self.dense, 0.5 * self.steps, self.steps)

    @cached_property
    def end_weights(self) -> np.ndarray:
        return np.where(self.dense, 0.5 * self.steps, 0.0)

    def locate(self, t: float) -> Tuple[int, float]:
        """(i, τ) with t ≡ nodes[i] + τ; τ = 0 at nodes, 0 < τ < steps[i] inside a dense segment."""
        r = self.timescale.reduce(t)
        tol = self.timescale.tolerance
        i = int(np.searchsorted(self.nodes, r, side="right")) - 1
        tau = r - self.nodes[i]
        if tau <= tol:
            return i, 0.0
        if tau >= self.steps[i] - tol:
            return (i + 1) % self.size, 0.0
        if self.dense[i]:
            return i, tau
        raise TimeScaleDomainError(t, self.timescale.nearest_cell(r))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Mesh):
            return NotImplemented
        return self.timescale == other.timescale and np.array_equal(self.nodes, other.nodes)

    def __hash__(self) -> int:
        return hash((self.timescale, self.size, self.dt_max))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """T-periodic function on a mesh.

    ``values[i]`` is the value at node i and ``ends[i]`` the left limit at the
    end of dense segment i, so continuous piecewise-linear functions and
    their piecewise-constant Δ-derivatives are both represented exactly.
    On scattered nodes ``ends`` mirrors ``values`` and is never integrated.
    """

    mesh: Mesh
    values: np.ndarray
    ends: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        ends = np.array(self.ends, dtype=float)
        shape = (self.mesh.size,)
        if values.shape != shape or ends.shape != shape:
            raise ConfigurationError(f"grid function needs {shape[0]} values, got {values.shape}")
        values.setflags(write=False)
        ends.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ends", ends)

    @classmethod
    def from_values(cls, mesh: Mesh, values: Any) -> "GridFunction":
        """Continuous, piecewise-linear on dense segments."""
        values = np.broadcast_to(np.asarray(values, dtype=float), (mesh.size,))
        return cls(mesh, values, np.where(mesh.dense, values[mesh.succ], values))

    @classmethod
    def step(cls, mesh: Mesh, values: Any) -> "GridFunction":
        """Piecewise-constant on dense segments (right-continuous at nodes)."""
        values = np.broadcast_to(np.asarray(values, dtype=float), (mesh.size,))
        return cls(mesh, values, values)

    @classmethod
    def sample(cls, mesh: Mesh, fn: Callable[[np.ndarray], Any]) -> "GridFunction":
        return cls.from_values(mesh, fn(mesh.nodes.copy()))

    @classmethod
    def constant(cls, mesh: Mesh, value: float) -> "GridFunction":
        return cls.step(mesh, float(value))

    def _check_compatible(self, other: "GridFunction") -> None:
        if other.mesh is not self.mesh and other.mesh != self.mesh:
            raise ConfigurationError("grid functions live on different meshes")

    def _combine(self, other: Any, op: Callable[[np.ndarray, Any], np.ndarray]) -> "GridFunction":
        if isinstance(other, GridFunction):
            self._check_compatible(other)
            return GridFunction(self.mesh, op(self.values, other.values), op(self.ends, other.ends))
        return GridFunction(self.mesh, op(self.values, other), op(self.ends, other))

    def __add__(self, other: Any) -> "GridFunction":
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "GridFunction":
        return self._combine(other, np.subtract)

    def __rsub__(self, other: Any) -> "GridFunction":
        return (-self) + other

    def __mul__(self, other: Any) -> "GridFunction":
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> "GridFunction":
        return self._combine(float(other), np.divide)

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.mesh, -self.values, -self.ends)

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Pointwise composition fn∘self."""
        values = np.broadcast_to(np.asarray(fn(self.values.copy()), dtype=float), self.values.shape)
        ends = np.broadcast_to(np.asarray(fn(self.ends.copy()), dtype=float), self.ends.shape)
        return GridFunction(self.mesh, values, ends)

    def collocated(self) -> "GridFunction":
        return GridFunction.step(self.mesh, self.values)

    def _dense_ends(self) -> np.ndarray:
        return self.ends[self.mesh.dense]

    def minimum(self) -> float:
        return float(np.min(np.concatenate((self.values, self._dense_ends()))))

    def maximum(self) -> float:
        return float(np.max(np.concatenate((self.values, self._dense_ends()))))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(np.concatenate((self.values, self._dense_ends())))))

    def __call__(self, t: float) -> float:
        i, tau = self.mesh.locate(t)
        if tau == 0.0:
            return float(self.values[i])
        frac = tau / self.mesh.steps[i]
        return float(self.values[i] + (self.ends[i] - self.values[i]) * frac)


def delta_derivative(x: GridFunction) -> GridFunction:
    """Δ-derivative: slope on dense segments, (x(σ(t)) − x(t))/μ(t) at scattered nodes."""
    mesh = x.mesh
    following = np.where(mesh.dense, x.ends, x.values[mesh.succ])
    return GridFunction.step(mesh, (following - x.values) / mesh.steps)


def _segment_integrals(f: GridFunction) -> np.ndarray:
    mesh = f.mesh
    return mesh.start_weights * f.values + mesh.end_weights * f.ends


def cumulative_integral(f: GridFunction) -> GridFunction:
    """Δ-antiderivative t ↦ ∫₀ᵗ f(s)Δs sampled at the nodes."""
    totals = np.cumsum(_segment_integrals(f))
    return GridFunction.from_values(f.mesh, np.concatenate(([0.0], totals[:-1])))


def period_integral(f: GridFunction) -> float:
    return float(np.sum(_segment_integrals(f)))


def _antiderivative(f: GridFunction, cumulative: np.ndarray, total: float, t: float) -> float:
    mesh = f.mesh
    period = mesh.period
    tol = mesh.timescale.tolerance
    turns = math.floor(t / period)
    r = t - turns * period
    if r > period - tol:
        turns, r = turns + 1, 0.0
    i, tau = mesh.locate(r)
    if i == 0 and tau == 0.0 and r > tol:
        # landed on T itself through the final segment
        return (turns + 1) * total
    value = cumulative[i]
    if tau > 0.0:
        end = f.values[i] + (f.ends[i] - f.values[i]) * tau / mesh.steps[i]
        value += 0.5 * tau * (f.values[i] + end)
    return turns * total + value


def delta_integral(f: GridFunction, start: float = 0.0, end: Optional[float] = None) -> float:
    """∫_start^end f(s)Δs: trapezoid on dense segments plus μ(t)·f(t) at scattered nodes."""
    if end is None:
        end = start + f.mesh.period
    if end < start:
        raise PreconditionError(f"integration range [{start}, {end}] is reversed")
    cumulative = np.concatenate(([0.0], np.cumsum(_segment_integrals(f))))
    total = float(cumulative[-1])
    return float(
        _antiderivative(f, cumulative, total, end) - _antiderivative(f, cumulative, total, start)
    )


@lru_cache(maxsize=64)
def _delay_indices(mesh: Mesh, r: float) -> np.ndarray:
    tol = mesh.timescale.tolerance
    period = mesh.period
    targets = np.mod(mesh.nodes - r, period)
    targets[targets > period - tol] = 0.0
    upper = np.clip(np.searchsorted(mesh.nodes, targets), 0, mesh.size - 1)
    lower = np.clip(upper - 1, 0, mesh.size - 1)
    pick_lower = np.abs(mesh.nodes[lower] - targets) < np.abs(mesh.nodes[upper] - targets)
    index = np.where(pick_lower, lower, upper)
    missing = np.abs(mesh.nodes[index] - targets) > tol
    if missing.any():
        t = float(mesh.nodes[np.argmax(missing)])
        raise ConfigurationError(
            f"delay r={r:g} maps node t={t:g} to t-r={float(targets[np.argmax(missing)]):g}, "
            "which is not a mesh node; the delay must be commensurable with the mesh "
            "and map it into itself"
        )
    broken = mesh.dense & (~mesh.dense[index] | (np.abs(mesh.steps[index] - mesh.steps) > tol))
    if broken.any():
        t = float(mesh.nodes[np.argmax(broken)])
        raise ConfigurationError(
            f"delay r={r:g} sends the dense segment at t={t:g} outside the time scale "
            "(𝕋 - r must be contained in 𝕋)"
        )
    index.setflags(write=False)
    return index


def reduce_delay(r: float, period: float) -> float:
    if r < 0:
        raise ConfigurationError(f"delay must be nonnegative, got {r!r}")
    reduced = float(r) % period
    if reduced > period * (1 - MEMBERSHIP_RTOL):
        reduced = 0.0
    return reduced


def shift(x: GridFunction, r: float) -> GridFunction:
    """(shift x)(t) = x(t − r) with periodic wraparound, as an exact node relabeling."""
    mesh = x.mesh
    reduced = reduce_delay(r, mesh.period)
    if reduced == 0.0:
        return x
    index = _delay_indices(mesh, reduced)
    values = x.values[index]
    return GridFunction(mesh, values, np.where(mesh.dense, x.ends[index], values))
