"""Sampled certification of the window conditions that guarantee one periodic solution per window.

Every check samples the universally quantified inequality on a finite grid;
the reports carry the sample count and the smallest observed slack so a
pass states exactly what was verified.
"""

from __future__ import annotations

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigurationError
from models import CheckReport, LemmaReport, SpacingReport, WindowCertificate
from periodic_solver import Problem, windows_from_alphas
from timescale import GridFunction, Mesh, cumulative_integral, delta_integral

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]
MIN_STRIP_SAMPLES = 64
MARGIN_RTOL = 1e-9
MONOTONE_TOL = 1e-12
SPACING_RTOL = 1e-12
METHODS = ("auto", "monotone", "near_constant", "monte_carlo", "user_asserted")
LEGENDRE_NODES, LEGENDRE_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _alphas(alphas: Sequence[float]) -> List[float]:
    values = [float(a) for a in alphas]
    windows_from_alphas(values)
    return values


def strip(alpha: float, a: float, period: float) -> Tuple[float, float]:
    half = 0.5 * a * period
    return alpha - half, alpha + half


def strip_samples(lo: float, hi: float, samples: int) -> np.ndarray:
    """Interior points lo + k(hi−lo)/m, k = 1..m−1; doubling m keeps every old point."""
    if samples < MIN_STRIP_SAMPLES:
        raise ConfigurationError(f"strip checks need at least {MIN_STRIP_SAMPLES} samples, got {samples}")
    return lo + (hi - lo) * np.arange(1, samples) / samples


def _evaluate(fn: ArrayFn, xs: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(xs), dtype=float), xs.shape)


def _margin(g_values: np.ndarray, margin: Optional[float]) -> float:
    if margin is not None:
        return float(margin)
    return MARGIN_RTOL * max(1.0, float(np.max(np.abs(g_values))))


def window_degrees(g: ArrayFn, alphas: Sequence[float]) -> List[int]:
    """Brouwer degree of g on each window from the endpoint signs."""
    signs = np.sign(_evaluate(g, np.asarray(alphas, dtype=float)))
    return [int(round((signs[k + 1] - signs[k]) / 2)) for k in range(len(alphas) - 1)]


def _g_sign(j: int, g_values: np.ndarray) -> int:
    """Sign of (−1)^j g at the strip centre."""
    return int(np.sign((-1) ** j * g_values[len(g_values) // 2]))


def check_window_spacing(alphas: Sequence[float], a: float, period: float) -> SpacingReport:
    """Each gap α_{j+1} − α_j must be at least aT."""
    values = _alphas(alphas)
    required = a * period
    gaps = [b - a_ for a_, b in zip(values, values[1:])]
    slacks = [gap - required for gap in gaps]
    passed = all(slack >= -SPACING_RTOL * max(1.0, required) for slack in slacks)
    return SpacingReport(passed=passed, required=required, gaps=gaps, slacks=slacks)


def _monotone_certificate(
    j: int, alpha: float, bounds: Tuple[float, float], xs: np.ndarray,
    g_values: np.ndarray, h_values: np.ndarray, sigma: int, margin: Optional[float],
) -> WindowCertificate:
    sign = sigma * (-1) ** j
    gs = sign * g_values
    hs = sign * h_values
    threshold = _margin(g_values, margin)
    g_ok = gs > threshold
    steps = np.diff(hs)
    rises = steps > MONOTONE_TOL * np.maximum(1.0, np.abs(hs[1:]))
    passed = bool(g_ok.all()) and not rises.any()
    witness = None
    if not g_ok.all():
        witness = float(xs[np.argmin(gs)])
    elif rises.any():
        witness = float(xs[int(np.argmax(rises)) + 1])
    return WindowCertificate(
        j=j, alpha=alpha, strip=bounds, condition="MonotoneH", passed=passed, orientation=sigma,
        g_sign=_g_sign(j, g_values), degree_sign=-sign, samples=int(xs.size), min_margin=float(np.min(gs)), witness=witness,
    )


def _near_constant_certificate(
    j: int, alpha: float, bounds: Tuple[float, float], xs: np.ndarray, g_values: np.ndarray,
    h_values: np.ndarray, sigma: int, a: float, gamma: Optional[float], margin: Optional[float],
) -> WindowCertificate:
    sign = sigma * (-1) ** j
    if gamma is None:
        gamma = 0.5 * (float(np.max(h_values)) + float(np.min(h_values)))
    slack = sign * g_values - a * np.abs(h_values - gamma)
    threshold = _margin(g_values, margin)
    worst = int(np.argmin(slack))
    passed = bool(slack[worst] > threshold)
    return WindowCertificate(
        j=j, alpha=alpha, strip=bounds, condition="NearConstantH", passed=passed, orientation=sigma,
        g_sign=_g_sign(j, g_values), degree_sign=-sign,
        samples=int(xs.size), min_margin=float(slack[worst]), gamma=float(gamma),
        witness=None if passed else float(xs[worst]),
    )


def _pick_orientation(candidates: List[List[WindowCertificate]]) -> List[WindowCertificate]:
    def rank(certs: List[WindowCertificate]) -> Tuple[int, float]:
        return sum(c.passed for c in certs), min(c.min_margin for c in certs)

    return max(candidates, key=rank)


def _orientations(orientation: Optional[int]) -> List[int]:
    if orientation is None:
        return [1, -1]
    if orientation not in (1, -1):
        raise ConfigurationError(f"orientation must be +1 or -1, got {orientation!r}")
    return [orientation]


def _delay_note(pb: Problem) -> str:
    return "delay replaced by the undelayed integral through periodicity" if pb.r else ""


def _strip_data(pb: Problem, alpha: float, samples: int) -> Tuple[Tuple[float, float], np.ndarray, np.ndarray, np.ndarray]:
    bounds = strip(alpha, pb.a, pb.period)
    xs = strip_samples(bounds[0], bounds[1], samples)
    return bounds, xs, _evaluate(pb.g, xs), _evaluate(pb.h, xs)


def _finish(
    pb: Problem, method: str, alphas: List[float], certificates: List[WindowCertificate],
    spacing_required: bool = True, proof: bool = True,
) -> CheckReport:
    note = _delay_note(pb)
    for cert in certificates:
        if note and not cert.note:
            cert.note = note
    report = CheckReport(
        method=method,
        certificates=certificates,
        spacing=check_window_spacing(alphas, pb.a, pb.period),
        degrees=window_degrees(pb.g, alphas),
        proof=proof,
        spacing_required=spacing_required,
    )
    for cert in certificates:
        if not cert.passed:
            logger.info("window condition fails at α_%d=%g (%s, witness %s)", cert.j, cert.alpha, cert.condition, cert.witness)
    return report


def check_corollary_monotone(
    pb: Problem,
    alphas: Sequence[float],
    samples: int = 256,
    orientation: Optional[int] = None,
    margin: Optional[float] = None,
) -> CheckReport:
    """σ(−1)^j g > 0 and σ(−1)^j h nonincreasing on every strip (α_j ± aT/2)."""
    values = _alphas(alphas)
    data = [_strip_data(pb, alpha, samples) for alpha in values]
    candidates = [
        [
            _monotone_certificate(j, alpha, bounds, xs, gv, hv, sigma, margin)
            for j, (alpha, (bounds, xs, gv, hv)) in enumerate(zip(values, data))
        ]
        for sigma in _orientations(orientation)
    ]
    return _finish(pb, "monotone", values, _pick_orientation(candidates))


def check_corollary_near_constant(
    pb: Problem,
    alphas: Sequence[float],
    gammas: Optional[Sequence[float]] = None,
    samples: int = 256,
    orientation: Optional[int] = None,
    margin: Optional[float] = None,
) -> CheckReport:
    """a|h − γ_j| < σ(−1)^j g on every strip; γ_j defaults to the midrange of h there."""
    values = _alphas(alphas)
    if gammas is not None and len(gammas) != len(values):
        raise ConfigurationError(f"need one gamma per alpha ({len(values)}), got {len(gammas)}")
    data = [_strip_data(pb, alpha, samples) for alpha in values]
    candidates = []
    for sigma in _orientations(orientation):
        certs = []
        for j, (alpha, (bounds, xs, gv, hv)) in enumerate(zip(values, data)):
            gamma = float(gammas[j]) if gammas is not None else None
            certs.append(_near_constant_certificate(j, alpha, bounds, xs, gv, hv, sigma, pb.a, gamma, margin))
        candidates.append(certs)
    return _finish(pb, "near_constant", values, _pick_orientation(candidates))


def random_admissible(mesh: Mesh, alpha: float, a: float, rng: np.random.Generator) -> GridFunction:
    """x = α + H(d) for a random mean-zero step d with sup|d| < a."""
    d = rng.uniform(-1.0, 1.0, mesh.size)
    d = d - np.dot(mesh.steps, d) / mesh.period
    peak = float(np.max(np.abs(d)))
    if peak > 0:
        d *= a * rng.uniform(0.05, 0.99) / peak
    path = cumulative_integral(GridFunction.step(mesh, d))
    return GridFunction.from_values(mesh, alpha + path.values)


def _antiderivative_at(h: ArrayFn, points: np.ndarray) -> np.ndarray:
    """∫_{min}^{u} h for every u in ``points``, by Gauss-Legendre between sorted neighbours."""
    order = np.argsort(points, kind="stable")
    ordered = points[order]
    half = 0.5 * np.diff(ordered)
    mid = 0.5 * (ordered[1:] + ordered[:-1])
    u = mid[:, None] + half[:, None] * LEGENDRE_NODES[None, :]
    flat = u.ravel()
    heights = np.broadcast_to(np.asarray(h(flat), dtype=float), flat.shape).reshape(u.shape)
    running = np.concatenate(([0.0], np.cumsum(half * (heights @ LEGENDRE_WEIGHTS))))
    result = np.empty_like(running)
    result[order] = running
    return result


def friction_work(h: ArrayFn, x: GridFunction) -> Tuple[float, float]:
    """∫₀ᵀ h(x)x^Δ Δt for x linear on dense segments, and the sum of absolute contributions.

    Dense segments contribute ∫_{x_i}^{x_{i+1}} h(u) du, so they telescope over a
    period; scattered nodes contribute h(x_i)(x_{i+1} − x_i).
    """
    mesh = x.mesh
    values = x.values
    following = np.where(mesh.dense, x.ends, values[mesh.succ])
    rise = following - values
    jumps = np.asarray(h(values), dtype=float) * rise
    if mesh.dense.any():
        primitive = _antiderivative_at(h, np.concatenate((values, following)))
        jumps = np.where(mesh.dense, primitive[mesh.size:] - primitive[: mesh.size], jumps)
    return float(np.sum(jumps)), float(np.sum(np.abs(jumps)))


def window_functional(pb: Problem, x: GridFunction) -> float:
    """∫₀ᵀ [h(x)x^Δ + g(x)]Δt."""
    work, _ = friction_work(pb.h, x)
    return work + delta_integral(x.apply(pb.g))


def falsify_window_condition(
    pb: Problem,
    alphas: Sequence[float],
    trials: int = 200,
    seed: int = 0,
    orientation: Optional[int] = None,
) -> CheckReport:
    """Monte-Carlo search for x with x(0)=α_j, |x^Δ|<a violating σ(−1)^j∫[h(x)x^Δ+g(x)] > 0.

    Surviving every trial is evidence, not a proof.
    """
    values = _alphas(alphas)
    rng = np.random.default_rng(seed)
    mesh = pb.mesh
    samples = []
    for alpha in values:
        trial_values = [window_functional(pb, GridFunction.constant(mesh, alpha))]
        for _ in range(trials):
            trial_values.append(window_functional(pb, random_admissible(mesh, alpha, pb.a, rng)))
        samples.append(np.array(trial_values))

    candidates = []
    for sigma in _orientations(orientation):
        certs = []
        for j, (alpha, found) in enumerate(zip(values, samples)):
            signed = sigma * (-1) ** j * found
            worst = int(np.argmin(signed))
            passed = bool(signed[worst] > 0.0)
            certs.append(
                WindowCertificate(
                    j=j, alpha=alpha, strip=strip(alpha, pb.a, pb.period), condition="MonteCarlo",
                    passed=passed, orientation=sigma, g_sign=_g_sign(j, found[:1]),
                    degree_sign=-sigma * (-1) ** j, samples=int(found.size), min_margin=float(signed[worst]),
                    witness=None if passed else float(worst), note="sampled, not a proof",
                )
            )
        candidates.append(certs)
    return _finish(pb, "monte_carlo", values, _pick_orientation(candidates), spacing_required=False, proof=False)


def assert_windows(pb: Problem, alphas: Sequence[float], orientation: int = -1) -> CheckReport:
    """Certificates taken on the user's word; only the endpoint degrees are computed."""
    values = _alphas(alphas)
    certs = [
        WindowCertificate(
            j=j, alpha=alpha, strip=strip(alpha, pb.a, pb.period), condition="UserAsserted", passed=True,
            orientation=orientation, g_sign=_g_sign(j, _evaluate(pb.g, np.array([alpha]))),
            degree_sign=-orientation * (-1) ** j, note="asserted by the user",
        )
        for j, alpha in enumerate(values)
    ]
    return _finish(pb, "user_asserted", values, certs, spacing_required=False, proof=False)


def check_windows(
    pb: Problem,
    alphas: Sequence[float],
    method: str = "auto",
    samples: int = 256,
    gammas: Optional[Sequence[float]] = None,
    trials: int = 200,
    seed: int = 0,
    orientation: Optional[int] = None,
    margin: Optional[float] = None,
) -> CheckReport:
    if method == "monotone":
        return check_corollary_monotone(pb, alphas, samples, orientation, margin)
    if method == "near_constant":
        return check_corollary_near_constant(pb, alphas, gammas, samples, orientation, margin)
    if method == "monte_carlo":
        return falsify_window_condition(pb, alphas, trials, seed, orientation)
    if method == "user_asserted":
        return assert_windows(pb, alphas, orientation or -1)
    if method != "auto":
        raise ConfigurationError(f"unknown check method {method!r}; expected one of {', '.join(METHODS)}")
    monotone = check_corollary_monotone(pb, alphas, samples, orientation, margin)
    if monotone.passed:
        return monotone
    return check_corollary_near_constant(pb, alphas, gammas, samples, orientation, margin)


def check_monotone_integral_lemma(
    h: ArrayFn,
    mesh: Mesh,
    trials: int = 100,
    orientation: str = "nondecreasing",
    seed: int = 0,
    amplitude: float = 1.0,
) -> LemmaReport:
    """Sign of ∫₀ᵀ h(x)x^Δ Δt over random periodic x: ≤ 0 for nondecreasing h, ≥ 0 for nonincreasing."""
    if orientation not in ("nondecreasing", "nonincreasing"):
        raise ConfigurationError(f"orientation must be nondecreasing or nonincreasing, got {orientation!r}")
    rng = np.random.default_rng(seed)
    sign = 1.0 if orientation == "nondecreasing" else -1.0
    values: List[float] = []
    worst = -np.inf
    offending = None
    tolerance = 0.0
    for trial in range(trials):
        x = GridFunction.from_values(mesh, amplitude * rng.standard_normal(mesh.size))
        value, scale = friction_work(h, x)
        tol = 1e-10 * max(scale, 1e-300)
        values.append(value)
        excess = sign * value - tol
        if excess > worst:
            worst, tolerance = excess, tol
        if excess > 0 and offending is None:
            offending = trial
            logger.warning("lemma sign violated in trial %d: integral %.6g", trial, value)
    return LemmaReport(
        orientation=orientation,
        trials=trials,
        passed=offending is None,
        worst=float(worst),
        tolerance=float(tolerance),
        values=values,
        offending_trial=offending,
    )


def alphas_from_zeros(zeros: Sequence[float]) -> List[float]:
    """Window centres α_j = (x_j + x_{j+1})/2 for consecutive zeros of a slowly oscillating g."""
    values = sorted(float(z) for z in zeros)
    if len(values) < 3:
        raise ConfigurationError("need at least three zeros to form two alphas")
    return [0.5 * (a + b) for a, b in zip(values, values[1:])]
