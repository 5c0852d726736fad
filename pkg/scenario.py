"""Scenario files: YAML descriptions of a periodic problem and how to check and solve it."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from catalog import make_function, make_phi, scaled_function
from config import SolverSettings
from errors import ConfigurationError, ScenarioError
from periodic_solver import Problem
from timescale import TimeScale

logger = logging.getLogger(__name__)

PI_PATTERN = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*$")
INT_SETTINGS = {"lambda_steps", "max_picard", "newton_maxiter", "seed_samples", "workers"}
TOP_LEVEL = {"name", "timescale", "phi", "h", "g", "p", "delay", "alphas", "check", "lemma", "solver", "output"}
SWEEP_PARAMETERS = ("c", "T-scale", "r", "forcing")

KeyPath = Tuple[Any, ...]


def parse_number(value: Any) -> float:
    """Floats, ints, fractions like "3/16" and multiples of pi like "0.9pi" or "-pi"."""
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip().lower()
        match = PI_PATTERN.match(text)
        if match:
            coefficient = match.group(1)
            if coefficient is None:
                return math.pi
            return float(coefficient) * math.pi
        if text in ("-pi",):
            return -math.pi
        try:
            return float(Fraction(text))
        except (ValueError, ZeroDivisionError):
            pass
    raise ValueError(f"expected a number, got {value!r}")


def _line_index(node: Optional[yaml.Node], path: KeyPath = (), index: Optional[Dict[KeyPath, int]] = None) -> Dict[KeyPath, int]:
    index = {} if index is None else index
    if node is None:
        return index
    index[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            _line_index(value_node, path + (key_node.value,), index)
    elif isinstance(node, yaml.SequenceNode):
        for k, item in enumerate(node.value):
            _line_index(item, path + (k,), index)
    return index


@dataclass
class CheckOptions:
    method: str = "auto"
    samples: int = 256
    gammas: Optional[List[float]] = None
    orientation: Optional[int] = None
    trials: int = 200
    seed: Optional[int] = None
    margin: Optional[float] = None


@dataclass
class LemmaOptions:
    h: Dict[str, Any]
    orientation: str = "nondecreasing"
    trials: int = 100
    amplitude: float = 1.0


@dataclass
class Scenario:
    path: str
    name: str
    timescale: TimeScale
    phi: Dict[str, Any]
    h: Dict[str, Any]
    g: Dict[str, Any]
    p: Optional[Dict[str, Any]]
    delay: float = 0.0
    alphas: Optional[List[float]] = None
    check: CheckOptions = field(default_factory=CheckOptions)
    lemma: Optional[LemmaOptions] = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    out_dir: Optional[str] = None
    sha256: str = ""
    forcing_scale: float = 1.0

    def build_problem(self, settings: Optional[SolverSettings] = None) -> Problem:
        settings = settings or self.solver
        period = self.timescale.period
        forcing = None
        if self.p:
            forcing = make_function(self.p, period, "p")
            if self.forcing_scale != 1.0:
                forcing = scaled_function(forcing, self.forcing_scale)
        return Problem.build(
            self.timescale,
            make_phi(self.phi),
            make_function(self.h, period, "h"),
            make_function(self.g, period, "g"),
            forcing,
            r=self.delay,
            dt_max=settings.mesh_dt,
            name=self.name,
        )

    def with_parameter(self, parameter: str, value: float) -> "Scenario":
        """Copy with one sweep parameter replaced."""
        if parameter == "c":
            phi = dict(self.phi)
            key = "c" if "c" in phi else "a"
            phi[key] = value
            return dataclasses.replace(self, phi=phi)
        if parameter == "T-scale":
            mesh_dt = self.solver.mesh_dt * value if self.solver.mesh_dt else None
            return dataclasses.replace(
                self,
                timescale=self.timescale.scaled(value),
                delay=self.delay * value,
                solver=dataclasses.replace(self.solver, mesh_dt=mesh_dt),
            )
        if parameter == "r":
            return dataclasses.replace(self, delay=value)
        if parameter == "forcing":
            return dataclasses.replace(self, forcing_scale=value)
        raise ConfigurationError(f"unknown sweep parameter {parameter!r}; expected one of {', '.join(SWEEP_PARAMETERS)}")


class _Reader:
    """Typed access to the raw YAML data with line-aware errors."""

    def __init__(self, path: str, data: Mapping[str, Any], lines: Dict[KeyPath, int]) -> None:
        self.path = path
        self.data = data
        self.lines = lines

    def fail(self, message: str, where: KeyPath = ()) -> ScenarioError:
        key = tuple(where)
        while key and key not in self.lines:
            key = key[:-1]
        label = ".".join(str(part) for part in where)
        text = f"{label}: {message}" if label else message
        return ScenarioError(text, self.path, self.lines.get(key))

    def get(self, where: KeyPath, default: Any = None) -> Any:
        node: Any = self.data
        for part in where:
            if isinstance(node, Mapping) and part in node:
                node = node[part]
            elif isinstance(node, list) and isinstance(part, int) and part < len(node):
                node = node[part]
            else:
                return default
        return node

    def number(self, where: KeyPath, default: Any = None) -> Optional[float]:
        raw = self.get(where, default)
        if raw is None:
            return None
        try:
            return parse_number(raw)
        except ValueError as exc:
            raise self.fail(str(exc), where) from exc

    def integer(self, where: KeyPath, default: Any = None) -> Optional[int]:
        raw = self.get(where, default)
        if raw is None:
            return None
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise self.fail(f"expected an integer, got {raw!r}", where)
        return raw

    def numbers(self, where: KeyPath) -> Optional[List[float]]:
        raw = self.get(where)
        if raw is None:
            return None
        if not isinstance(raw, list):
            raise self.fail("expected a list of numbers", where)
        return [self.number(where + (k,)) for k in range(len(raw))]

    def function(self, where: KeyPath, required: bool = True) -> Optional[Dict[str, Any]]:
        raw = self.get(where)
        if raw is None:
            if required:
                raise self.fail("is required", where)
            return None
        if not isinstance(raw, Mapping) or "kind" not in raw:
            raise self.fail("expected a mapping with a 'kind' key", where)
        spec: Dict[str, Any] = {"kind": raw["kind"]}
        for key, value in raw.items():
            if key == "kind":
                continue
            if key == "points":
                if not isinstance(value, list):
                    raise self.fail("expected a list of [x, y] pairs", where + (key,))
                spec[key] = [[self.number(where + (key, i, 0)), self.number(where + (key, i, 1))] for i in range(len(value))]
            else:
                spec[key] = self.number(where + (key,))
        return spec


def _cell_number(reader: _Reader, where: KeyPath) -> float:
    value = reader.number(where)
    if value is None:
        raise reader.fail("expected a number", where)
    return value


def _cell(reader: _Reader, where: KeyPath) -> Any:
    raw = reader.get(where)
    if isinstance(raw, list):
        if len(raw) != 2:
            raise reader.fail("interval cells are [lo, hi] pairs", where)
        return [_cell_number(reader, where + (0,)), _cell_number(reader, where + (1,))]
    return _cell_number(reader, where)


def _timescale(reader: _Reader) -> TimeScale:
    period = reader.number(("timescale", "period"))
    if period is None:
        raise reader.fail("is required", ("timescale", "period"))
    cells_raw = reader.get(("timescale", "cells"))
    if cells_raw is None:
        logger.info("no cells given; using the continuous time scale [0, %g]", period)
        cells: List[Any] = [[0.0, period]]
    elif not isinstance(cells_raw, list):
        raise reader.fail("expected a list of [lo, hi] pairs and points", ("timescale", "cells"))
    else:
        cells = [_cell(reader, ("timescale", "cells", k)) for k in range(len(cells_raw))]
    try:
        return TimeScale.from_spec(period, cells)
    except (TypeError, ValueError) as exc:
        raise reader.fail(str(exc), ("timescale", "cells")) from exc


def _solver(reader: _Reader, period: float) -> SolverSettings:
    block = reader.get(("solver",)) or {}
    if not isinstance(block, Mapping):
        raise reader.fail("expected a mapping", ("solver",))
    values: Dict[str, Any] = {}
    for key, raw in block.items():
        where = ("solver", key)
        if key == "mesh_steps":
            steps = reader.integer(where)
            if not steps or steps <= 0:
                raise reader.fail("must be a positive integer", where)
            values["mesh_dt"] = period / steps
        elif key == "newton":
            if not isinstance(raw, bool):
                raise reader.fail("expected true or false", where)
            values[key] = raw
        elif key in INT_SETTINGS:
            values[key] = reader.integer(where)
        else:
            values[key] = reader.number(where)
    try:
        return SolverSettings.from_mapping(values)
    except ValueError as exc:
        raise reader.fail(str(exc), ("solver",)) from exc


def _check(reader: _Reader) -> CheckOptions:
    options = CheckOptions()
    block = reader.get(("check",)) or {}
    if not isinstance(block, Mapping):
        raise reader.fail("expected a mapping", ("check",))
    unknown = sorted(set(block) - {f.name for f in dataclasses.fields(CheckOptions)})
    if unknown:
        raise reader.fail(f"unknown key(s): {', '.join(unknown)}", ("check",))
    if "method" in block:
        options.method = str(block["method"])
    for key in ("samples", "orientation", "trials", "seed"):
        if key in block:
            setattr(options, key, reader.integer(("check", key)))
    options.gammas = reader.numbers(("check", "gammas"))
    options.margin = reader.number(("check", "margin"))
    return options


def _lemma(reader: _Reader) -> Optional[LemmaOptions]:
    block = reader.get(("lemma",))
    if block is None:
        return None
    if not isinstance(block, Mapping):
        raise reader.fail("expected a mapping", ("lemma",))
    options = LemmaOptions(h=reader.function(("lemma", "h")))
    if "orientation" in block:
        options.orientation = str(block["orientation"])
    if "trials" in block:
        options.trials = reader.integer(("lemma", "trials"))
    if "amplitude" in block:
        options.amplitude = reader.number(("lemma", "amplitude"))
    return options


def parse_scenario(path: str) -> Scenario:
    """Read and validate a scenario file; the problem is built once so data errors surface here."""
    source = Path(path)
    if not source.exists():
        raise ScenarioError("scenario file not found", str(path))
    raw_bytes = source.read_bytes()
    try:
        text = raw_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioError(f"scenario is not valid UTF-8 (byte {exc.start})", str(path)) from exc
    try:
        data = yaml.safe_load(text)
        lines = _line_index(yaml.compose(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"invalid YAML: {getattr(exc, 'problem', exc)}", str(path), mark.line + 1 if mark else None) from exc
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a YAML mapping", str(path), 1)

    reader = _Reader(str(path), data, lines)
    unknown = sorted(set(data) - TOP_LEVEL)
    if unknown:
        raise reader.fail(f"unknown top-level key(s): {', '.join(map(str, unknown))}")

    timescale = _timescale(reader)
    phi = reader.get(("phi",))
    if not isinstance(phi, Mapping) or "kind" not in phi:
        raise reader.fail("phi needs a mapping with 'kind'", ("phi",))
    phi_spec = {"kind": phi["kind"], **{k: reader.number(("phi", k)) for k in phi if k != "kind"}}

    alphas = reader.numbers(("alphas",))
    if alphas is not None and any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise reader.fail("must be strictly increasing", ("alphas",))

    output = reader.get(("output",)) or {}
    scenario = Scenario(
        path=str(path),
        name=str(data.get("name") or source.stem),
        timescale=timescale,
        phi=phi_spec,
        h=reader.function(("h",)),
        g=reader.function(("g",)),
        p=reader.function(("p",), required=False),
        delay=reader.number(("delay",), 0.0),
        alphas=alphas,
        check=_check(reader),
        lemma=_lemma(reader),
        solver=_solver(reader, timescale.period),
        out_dir=output.get("dir") if isinstance(output, Mapping) else None,
        sha256=hashlib.sha256(raw_bytes).hexdigest(),
    )

    try:
        problem = scenario.build_problem()
    except ConfigurationError as exc:
        raise ScenarioError(str(exc), str(path)) from exc
    if problem.forcing_offset:
        logger.info("scenario %s: forcing re-centered by %.6g", scenario.name, problem.forcing_offset)
    logger.info(
        "scenario %s: T=%g, %d cell(s), a=%g, %d mesh nodes",
        scenario.name, timescale.period, len(timescale.cells), problem.a, problem.mesh.size,
    )
    return scenario


def sweep_values(values: Optional[Sequence[float]], span: Optional[Sequence[float]]) -> List[float]:
    """Explicit values, or `start stop count` spread evenly (count 1 gives start)."""
    if values:
        return [float(v) for v in values]
    if not span or len(span) != 3:
        raise ConfigurationError("sweep needs --values or --range start stop count")
    start, stop, count = float(span[0]), float(span[1]), int(span[2])
    if count < 1:
        raise ConfigurationError("sweep count must be at least 1")
    if count == 1 or start == stop:
        return [start]
    return [start + (stop - start) * k / (count - 1) for k in range(count)]
