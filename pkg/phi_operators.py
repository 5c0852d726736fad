"""Singular homeomorphisms φ:(−a, a)→ℝ and the Q_φ recentering operator."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from errors import ConfigurationError, PreconditionError
from rootfind import bisection
from timescale import GridFunction

logger = logging.getLogger(__name__)

CLAMP_RTOL = 1e-12
POLISH_STEPS = 4

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PhiHomeomorphism:
    """Increasing homeomorphism φ:(−a, a)→ℝ with φ(0)=0, given with its inverse."""

    kind: str
    a: float
    forward: ArrayFn = field(repr=False)
    inverse: ArrayFn = field(repr=False)
    params: Dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and self.a > 0):
            raise ConfigurationError(f"φ needs a finite half-width a > 0, got {self.a!r}")

    def forward_clamped(self, v: Any, warn: bool = True) -> Tuple[np.ndarray, int]:
        """φ(v) with v clamped into (−a(1−1e−12), a(1−1e−12)); returns values and clamp count."""
        v = np.asarray(v, dtype=float)
        limit = self.a * (1.0 - CLAMP_RTOL)
        outside = np.abs(v) > limit
        clamped = int(np.count_nonzero(outside))
        if clamped:
            if warn:
                logger.warning("φ(%s) clamped %d argument(s) with |v| >= a=%g", self.kind, clamped, self.a)
            v = np.clip(v, -limit, limit)
        return np.asarray(self.forward(v), dtype=float), clamped

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "a": self.a, **self.params}


def phi_inverse_relativistic(y: Any, c: float) -> Any:
    """c·y/√(c²+y²): total on ℝ, odd, strictly increasing, |result| < c."""
    if c <= 0:
        raise ConfigurationError(f"speed of light c must be positive, got {c!r}")
    y = np.asarray(y, dtype=float)
    result = c * y / np.hypot(c, y)
    return float(result) if result.ndim == 0 else result


def relativistic(c: float) -> PhiHomeomorphism:
    c = float(c)

    def forward(v: np.ndarray) -> np.ndarray:
        return v / np.sqrt(1.0 - (v / c) ** 2)

    return PhiHomeomorphism("relativistic", c, forward, lambda y: phi_inverse_relativistic(y, c), {"c": c})


def arctan_scaled(a: float) -> PhiHomeomorphism:
    a = float(a)
    return PhiHomeomorphism(
        "arctan_scaled",
        a,
        lambda v: np.tan(0.5 * np.pi * v / a),
        lambda y: (2.0 * a / np.pi) * np.arctan(y),
        {"a": a},
    )


def tanh_scaled(a: float) -> PhiHomeomorphism:
    a = float(a)
    return PhiHomeomorphism(
        "tanh_scaled",
        a,
        lambda v: a * np.arctanh(v / a),
        lambda y: a * np.tanh(np.asarray(y, dtype=float) / a),
        {"a": a},
    )


def rational(a: float) -> PhiHomeomorphism:
    a = float(a)

    def inverse(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return 2.0 * y / (1.0 + np.sqrt(1.0 + 4.0 * (y / a) ** 2))

    return PhiHomeomorphism("rational", a, lambda v: v / (1.0 - (v / a) ** 2), inverse, {"a": a})


def user_defined(forward: ArrayFn, inverse: ArrayFn, a: float, name: str = "user") -> PhiHomeomorphism:
    phi = PhiHomeomorphism(name, float(a), forward, inverse)
    check_homeomorphism(phi)
    return phi


def check_homeomorphism(phi: PhiHomeomorphism, samples: int = 401) -> float:
    """Sampled check of φ(0)=0, monotonicity, round trip and bounded range.

    Returns the largest relative round-trip error; raises ConfigurationError on failure.
    """
    if abs(float(phi.forward(np.array(0.0)))) > 1e-14 or abs(float(phi.inverse(np.array(0.0)))) > 1e-14:
        raise ConfigurationError(f"φ({phi.kind}) must satisfy φ(0) = 0 and φ⁻¹(0) = 0")
    v = phi.a * np.linspace(-0.999, 0.999, samples)
    y = np.asarray(phi.forward(v), dtype=float)
    if not np.all(np.isfinite(y)) or np.any(np.diff(y) <= 0):
        raise ConfigurationError(f"φ({phi.kind}) is not strictly increasing and finite on (-a, a)")
    back = np.asarray(phi.forward(np.asarray(phi.inverse(y), dtype=float)), dtype=float)
    error = float(np.max(np.abs(back - y) / np.maximum(1.0, np.abs(y))))
    if error > 1e-10:
        raise ConfigurationError(f"φ({phi.kind}) round trip φ(φ⁻¹(y)) is off by {error:.3g}")
    far = np.asarray(phi.inverse(np.array([-1e12, -1e6, 1e6, 1e12]) * phi.a), dtype=float)
    if np.any(np.abs(far) > phi.a) or np.any(np.diff(far) < 0):
        raise ConfigurationError(f"φ⁻¹({phi.kind}) must be increasing with range inside (-a, a)")
    return error


@dataclass(frozen=True)
class QPhiResult:
    value: float
    bracket: Tuple[float, float]
    iterations: int
    residual: float


def q_phi_objective(x: GridFunction, phi: PhiHomeomorphism, s: float) -> float:
    """G_x(s) = ∫₀ᵀ φ⁻¹(x(t) − s)Δt, continuous and strictly decreasing in s."""
    mesh = x.mesh
    return float(
        np.dot(mesh.start_weights, phi.inverse(x.values - s))
        + np.dot(mesh.end_weights, phi.inverse(x.ends - s))
    )


def q_phi(x: GridFunction, phi: PhiHomeomorphism, tol: float = 1e-12, ftol: Optional[float] = None) -> QPhiResult:
    """Unique s in [min x, max x] with ∫₀ᵀ φ⁻¹(x(t) − s)Δt = 0, by bisection.

    Bisection stops on bracket width ``tol`` or residual ``ftol`` (default tol·T·a),
    then a few regula falsi steps inside the bracket polish the value.
    """
    if not tol > 0:
        raise PreconditionError(f"q_phi tolerance must be positive, got {tol!r}")
    x_min, x_max = x.minimum(), x.maximum()
    if x_min == x_max:
        return QPhiResult(x_min, (x_min, x_max), 0, 0.0)

    objective = lambda s: q_phi_objective(x, phi, s)  # noqa: E731
    at_min, at_max = objective(x_min), objective(x_max)
    # rounding can leave a nearly constant x without a strict sign change
    if at_min <= 0.0:
        return QPhiResult(x_min, (x_min, x_max), 0, abs(at_min))
    if at_max >= 0.0:
        return QPhiResult(x_max, (x_min, x_max), 0, abs(at_max))
    if ftol is None:
        ftol = tol * x.mesh.period * phi.a
    found = bisection(objective, x_min, x_max, tol=tol, max_iter=400, ftol=ftol)
    value, residual = found.root, found.residual
    lo, hi = found.lo, found.hi
    g_lo, g_hi = objective(lo), objective(hi)
    for _ in range(POLISH_STEPS):
        if residual == 0.0 or not (hi > lo and g_lo > 0.0 > g_hi):
            break
        candidate = lo + (hi - lo) * g_lo / (g_lo - g_hi)
        g_candidate = objective(candidate)
        if abs(g_candidate) < residual:
            value, residual = candidate, abs(g_candidate)
        if g_candidate > 0.0:
            lo, g_lo = candidate, g_candidate
        elif g_candidate < 0.0:
            hi, g_hi = candidate, g_candidate
        else:
            break
    return QPhiResult(value, (x_min, x_max), found.iterations, residual)


def q_phi_shift_check(x: GridFunction, k: float, phi: PhiHomeomorphism, tol: float = 1e-12) -> Tuple[float, float]:
    """(Q_φ(x + k), Q_φ(x) + k), equal up to 2·tol."""
    return q_phi(x + k, phi, tol).value, q_phi(x, phi, tol).value + k
