"""Named function families for h, g, p and φ used by scenario files."""

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, Mapping, Tuple

import numpy as np

from errors import ConfigurationError
from phi_operators import PhiHomeomorphism, arctan_scaled, rational, relativistic, tanh_scaled

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]
Builder = Callable[[Dict[str, Any], float], ArrayFn]


def _angular(params: Dict[str, Any], period: float) -> float:
    cycles = params.get("cycles")
    if cycles is not None:
        return 2.0 * math.pi * float(cycles) / period
    return float(params["frequency"])


def _sin(params: Dict[str, Any], period: float) -> ArrayFn:
    amp, phase, offset = float(params["amplitude"]), float(params["phase"]), float(params["offset"])
    omega = _angular(params, period)
    return lambda x: amp * np.sin(omega * np.asarray(x, dtype=float) + phase) + offset


def _cos(params: Dict[str, Any], period: float) -> ArrayFn:
    amp, phase, offset = float(params["amplitude"]), float(params["phase"]), float(params["offset"])
    omega = _angular(params, period)
    return lambda x: amp * np.cos(omega * np.asarray(x, dtype=float) + phase) + offset


def _constant(params: Dict[str, Any], period: float) -> ArrayFn:
    value = float(params["value"])
    return lambda x: np.full(np.shape(x), value)


def _linear(params: Dict[str, Any], period: float) -> ArrayFn:
    slope, intercept = float(params["slope"]), float(params["intercept"])
    return lambda x: slope * np.asarray(x, dtype=float) + intercept


def _arctan(params: Dict[str, Any], period: float) -> ArrayFn:
    amp, scale = float(params["amplitude"]), float(params["scale"])
    return lambda x: amp * np.arctan(scale * np.asarray(x, dtype=float))


def _tanh(params: Dict[str, Any], period: float) -> ArrayFn:
    amp, scale = float(params["amplitude"]), float(params["scale"])
    return lambda x: amp * np.tanh(scale * np.asarray(x, dtype=float))


def _cubic(params: Dict[str, Any], period: float) -> ArrayFn:
    coefficients = [float(params[k]) for k in ("a3", "a2", "a1", "a0")]
    return lambda x: np.polyval(coefficients, np.asarray(x, dtype=float))


def _gaussian(params: Dict[str, Any], period: float) -> ArrayFn:
    amp, center, width = float(params["amplitude"]), float(params["center"]), float(params["width"])
    if width <= 0:
        raise ConfigurationError("gaussian width must be positive")
    return lambda x: amp * np.exp(-0.5 * ((np.asarray(x, dtype=float) - center) / width) ** 2)


def _exp_neg_square(params: Dict[str, Any], period: float) -> ArrayFn:
    amp, scale = float(params["amplitude"]), float(params["scale"])
    return lambda x: amp * np.exp(-((scale * np.asarray(x, dtype=float)) ** 2))


def _piecewise_linear(params: Dict[str, Any], period: float) -> ArrayFn:
    points = params["points"]
    try:
        table = np.array(points, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"piecewise_linear points must be [x, y] pairs: {exc}") from exc
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
        raise ConfigurationError("piecewise_linear needs at least two [x, y] points")
    if np.any(np.diff(table[:, 0]) <= 0):
        raise ConfigurationError("piecewise_linear x values must be strictly increasing")
    xs, ys = table[:, 0].copy(), table[:, 1].copy()
    return lambda x: np.interp(np.asarray(x, dtype=float), xs, ys)


FAMILIES: Dict[str, Tuple[Dict[str, Any], Builder]] = {
    "constant": ({"value": 0.0}, _constant),
    "linear": ({"slope": 1.0, "intercept": 0.0}, _linear),
    "sin": ({"amplitude": 1.0, "frequency": 1.0, "phase": 0.0, "offset": 0.0, "cycles": None}, _sin),
    "cos": ({"amplitude": 1.0, "frequency": 1.0, "phase": 0.0, "offset": 0.0, "cycles": None}, _cos),
    "arctan": ({"amplitude": 1.0, "scale": 1.0}, _arctan),
    "tanh": ({"amplitude": 1.0, "scale": 1.0}, _tanh),
    "cubic": ({"a3": 1.0, "a2": 0.0, "a1": 0.0, "a0": 0.0}, _cubic),
    "gaussian": ({"amplitude": 1.0, "center": 0.0, "width": 1.0}, _gaussian),
    "exp_neg_square": ({"amplitude": 1.0, "scale": 1.0}, _exp_neg_square),
    "piecewise_linear": ({"points": None}, _piecewise_linear),
}

PHI_KINDS: Dict[str, Tuple[str, Callable[[float], PhiHomeomorphism]]] = {
    "relativistic": ("c", relativistic),
    "arctan_scaled": ("a", arctan_scaled),
    "tanh_scaled": ("a", tanh_scaled),
    "rational": ("a", rational),
}


def _split(spec: Mapping[str, Any], what: str) -> Tuple[str, Dict[str, Any]]:
    if not isinstance(spec, Mapping):
        raise ConfigurationError(f"{what} must be a mapping with a 'kind' key, got {spec!r}")
    params = dict(spec)
    kind = params.pop("kind", None)
    if not kind:
        raise ConfigurationError(f"{what} is missing 'kind'")
    return str(kind), params


def make_function(spec: Mapping[str, Any], period: float, what: str = "function") -> ArrayFn:
    """Vectorized callable from {'kind': family, **params}."""
    kind, params = _split(spec, what)
    if kind not in FAMILIES:
        raise ConfigurationError(f"unknown {what} kind {kind!r}; known: {', '.join(sorted(FAMILIES))}")
    defaults, builder = FAMILIES[kind]
    unknown = sorted(set(params) - set(defaults))
    if unknown:
        raise ConfigurationError(f"{what} ({kind}) has unknown parameter(s): {', '.join(unknown)}")
    merged = {**defaults, **params}
    missing = [key for key, value in merged.items() if value is None and key != "cycles"]
    if missing:
        raise ConfigurationError(f"{what} ({kind}) needs parameter(s): {', '.join(missing)}")
    try:
        return builder(merged, period)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{what} ({kind}) has invalid parameters: {exc}") from exc


def make_phi(spec: Mapping[str, Any]) -> PhiHomeomorphism:
    kind, params = _split(spec, "phi")
    if kind not in PHI_KINDS:
        raise ConfigurationError(f"unknown phi kind {kind!r}; known: {', '.join(sorted(PHI_KINDS))}")
    key, factory = PHI_KINDS[kind]
    unknown = sorted(set(params) - {key})
    if unknown or key not in params:
        raise ConfigurationError(f"phi ({kind}) takes exactly one parameter {key!r}")
    return factory(float(params[key]))


def scaled_function(fn: ArrayFn, factor: float) -> ArrayFn:
    return lambda x: factor * np.asarray(fn(x), dtype=float)
