"""Operators N_f, P, Q, H, the homotopy map M(λ, x) and the window solver."""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import NoConvergence, newton_krylov
from tqdm import tqdm

from config import SolverSettings
from errors import ConfigurationError, PreconditionError
from models import FailureReport, HomotopyState, SolutionRecord, SolveOutcome, Window
from phi_operators import PhiHomeomorphism, q_phi
from rootfind import nearest_root
from timescale import (
    GridFunction,
    Mesh,
    TimeScale,
    cumulative_integral,
    delta_derivative,
    period_integral,
    reduce_delay,
    shift,
)

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]
MEAN_RTOL = 1e-9


@dataclass(frozen=True)
class Problem:
    """Data of (φ(x^Δ))^Δ = −h(x)x^Δ − g(x(t−r)) + p(t) on a periodic time scale."""

    timescale: TimeScale
    phi: PhiHomeomorphism
    h: ArrayFn = field(repr=False)
    g: ArrayFn = field(repr=False)
    p: GridFunction = field(repr=False)
    r: float = 0.0
    forcing_offset: float = 0.0
    name: str = ""

    @classmethod
    def build(
        cls,
        timescale: TimeScale,
        phi: PhiHomeomorphism,
        h: ArrayFn,
        g: ArrayFn,
        p: Union[GridFunction, ArrayFn, None] = None,
        r: float = 0.0,
        mesh: Optional[Mesh] = None,
        dt_max: Optional[float] = None,
        name: str = "",
    ) -> "Problem":
        mesh = mesh or Mesh.build(timescale, dt_max)
        if mesh.timescale != timescale:
            raise ConfigurationError("mesh was built for a different time scale")
        if p is None:
            forcing = GridFunction.constant(mesh, 0.0)
        elif isinstance(p, GridFunction):
            if p.mesh != mesh:
                raise ConfigurationError("forcing p lives on a different mesh")
            forcing = p.collocated()
        else:
            forcing = GridFunction.step(mesh, p(mesh.nodes.copy()))
        if not np.all(np.isfinite(forcing.values)):
            raise ConfigurationError("forcing p is not finite on the mesh")

        offset = projector_Q(forcing)
        if abs(offset) > 1e-12 * max(1.0, forcing.sup_norm()):
            logger.warning("forcing p has mean %.6g; re-centering to mean zero", offset)
        forcing = forcing - offset

        delay = reduce_delay(r, timescale.period)
        shift(forcing, delay)
        problem = cls(timescale, phi, h, g, forcing, delay, offset, name)
        problem.check_finite(-1.0, 1.0, 5)
        return problem

    def check_finite(self, lo: float, hi: float, samples: int) -> None:
        """h and g must be finite on ``samples`` points of [lo, hi]."""
        grid = np.linspace(lo, hi, max(int(samples), 2))
        for label, fn in (("h", self.h), ("g", self.g)):
            values = np.asarray(fn(grid), dtype=float)
            bad = ~np.isfinite(values)
            if bad.any():
                raise ConfigurationError(f"{label} is not finite at x = {float(grid[np.argmax(bad)]):g}")

    @property
    def mesh(self) -> Mesh:
        return self.p.mesh

    @property
    def a(self) -> float:
        return self.phi.a

    @property
    def period(self) -> float:
        return self.timescale.period


def nemytskii(pb: Problem, x: GridFunction, xd: GridFunction) -> GridFunction:
    """N_f(x)(t) = −h(x(t))x^Δ(t) − g(x(t−r)) + p(t), collocated at the nodes."""
    delayed = shift(x, pb.r)
    values = -np.asarray(pb.h(x.values), dtype=float) * xd.values
    values = values - np.asarray(pb.g(delayed.values), dtype=float) + pb.p.values
    return GridFunction.step(pb.mesh, values)


def projector_Q(z: GridFunction) -> float:
    return period_integral(z) / z.mesh.period


def projector_P(x: GridFunction) -> float:
    return float(x.values[0])


def integrator_H(z: GridFunction) -> GridFunction:
    """H(z)(t) = ∫₀ᵗ z(s)Δs for mean-zero z."""
    mean = projector_Q(z)
    if abs(mean) > MEAN_RTOL * max(1.0, z.sup_norm()):
        raise PreconditionError(f"H needs a mean-zero argument, got Q(z) = {mean:.6g}")
    return cumulative_integral(z)


def apply_m(
    pb: Problem,
    lam: float,
    x: GridFunction,
    xd: Optional[GridFunction] = None,
    tol_qphi: float = 1e-13,
) -> Tuple[GridFunction, GridFunction]:
    """M(λ, x) = P(x) + Q(N_f(x)) + H(φ⁻¹[λH(w) − Q_φ(λH(w))]) with w = N_f(x) − Q(N_f(x)).

    Returns the new iterate and its Δ-derivative; both stay on x's mesh.
    """
    if not 0.0 <= lam <= 1.0:
        raise PreconditionError(f"λ must lie in [0, 1], got {lam!r}")
    if xd is None:
        xd = delta_derivative(x)
    n = nemytskii(pb, x, xd)
    qn = projector_Q(n)
    u = (lam * integrator_H(n - qn)).collocated()
    qp = q_phi(u, pb.phi, tol_qphi).value
    v = (u - qp).apply(pb.phi.inverse)
    y = GridFunction.from_values(pb.mesh, projector_P(x) + qn + integrator_H(v).values)
    return y, v


def c1_norm(x: GridFunction, xd: GridFunction) -> float:
    return x.sup_norm() + xd.sup_norm()


def equation_residual(pb: Problem, x: GridFunction) -> float:
    """sup over nodes of |(φ(x^Δ))^Δ − N_f(x)|."""
    xd = delta_derivative(x)
    outside = np.abs(xd.values) >= pb.a
    if outside.any():
        node = int(np.argmax(outside))
        raise PreconditionError(
            f"|x^Δ| = {abs(xd.values[node]):.6g} >= a = {pb.a:g} at node t = {pb.mesh.nodes[node]:.6g}"
        )
    z = GridFunction.from_values(pb.mesh, pb.phi.forward(xd.values))
    n = nemytskii(pb, x, xd)
    return float(np.max(np.abs(delta_derivative(z).values - n.values)))


def seed_root(g: ArrayFn, window: Window, samples: int = 512) -> Optional[float]:
    """Root of g inside the window nearest to its midpoint."""
    lo, hi = window
    return nearest_root(g, lo, hi, samples)


class HomotopyMap:
    """x ↦ M(λ, x) with evaluation and a-priori bound counters."""

    def __init__(self, pb: Problem, tol_qphi: float = 1e-13) -> None:
        self.pb = pb
        self.tol_qphi = tol_qphi
        self.evaluations = 0
        self.bound_violations = 0
        self._lock = threading.Lock()

    def __call__(self, lam: float, x: GridFunction) -> Tuple[GridFunction, GridFunction]:
        y, v = apply_m(self.pb, lam, x, delta_derivative(x), self.tol_qphi)
        with self._lock:
            self.evaluations += 1
            if v.sup_norm() >= self.pb.a:
                self.bound_violations += 1
                logger.warning("iterate violates |y^Δ| < a (sup %.17g, a=%g)", v.sup_norm(), self.pb.a)
        return y, v

    def defect(self, lam: float, x: GridFunction) -> Tuple[float, GridFunction]:
        y, v = self(lam, x)
        return _defect(x, y, v), y

    def residual_vector(self, lam: float) -> Callable[[np.ndarray], np.ndarray]:
        mesh = self.pb.mesh

        def residual(values: np.ndarray) -> np.ndarray:
            x = GridFunction.from_values(mesh, values)
            return x.values - self(lam, x)[0].values

        return residual


def _defect(x: GridFunction, y: GridFunction, v: GridFunction) -> float:
    """C¹ distance between x and M(λ, x), with y^Δ = v."""
    return c1_norm(x - y, delta_derivative(x) - v)


def _picard(
    hmap: HomotopyMap, lam: float, x: GridFunction, settings: SolverSettings
) -> Tuple[bool, GridFunction, float, int]:
    """Damped iteration x ← (1−θ)x + θM(λ, x); θ halves when the defect grows."""
    y, v = hmap(lam, x)
    defect = _defect(x, y, v)
    theta = 1.0
    iterations = 0
    while defect >= settings.tol_fp and iterations < settings.max_picard:
        candidate = x * (1.0 - theta) + y * theta
        cy, cv = hmap(lam, candidate)
        candidate_defect = _defect(candidate, cy, cv)
        iterations += 1
        if np.isfinite(candidate_defect) and candidate_defect < defect:
            x, y, defect = candidate, cy, candidate_defect
            theta = min(1.0, 2.0 * theta)
        else:
            theta *= 0.5
            if theta < settings.theta_min:
                break
    return defect < settings.tol_fp, x, defect, iterations


def _newton(
    hmap: HomotopyMap, lam: float, x: GridFunction, f_tol: float, settings: SolverSettings
) -> Tuple[bool, GridFunction, float, int]:
    """Newton–Krylov on x − M(λ, x) = 0."""
    steps = [0]

    def count(*_: object) -> None:
        steps[0] += 1

    start_defect, _ = hmap.defect(lam, x)
    try:
        values = newton_krylov(
            hmap.residual_vector(lam),
            x.values.copy(),
            f_tol=f_tol,
            maxiter=settings.newton_maxiter,
            callback=count,
        )
    except NoConvergence as exc:
        values = np.asarray(exc.args[0], dtype=float)
        logger.debug("Newton at λ=%.4f stopped after %d steps without reaching %g", lam, steps[0], f_tol)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        logger.debug("Newton at λ=%.4f failed: %s", lam, exc)
        return False, x, start_defect, steps[0]

    if not np.all(np.isfinite(values)):
        return False, x, start_defect, steps[0]
    candidate = GridFunction.from_values(x.mesh, values)
    defect, _ = hmap.defect(lam, candidate)
    if not defect < start_defect:
        return start_defect < settings.tol_fp, x, start_defect, steps[0]
    return defect < settings.tol_fp, candidate, defect, steps[0]


def _correct(
    hmap: HomotopyMap, lam: float, x: GridFunction, settings: SolverSettings
) -> Tuple[bool, GridFunction, float, int, int]:
    converged, best, defect, iterations = _picard(hmap, lam, x, settings)
    newton_steps = 0
    if not converged and settings.newton:
        converged, best, defect, newton_steps = _newton(hmap, lam, best, settings.tol_newton, settings)
    return converged, best, defect, iterations, newton_steps


def homotopy_solve(
    pb: Problem,
    window: Window,
    settings: Optional[SolverSettings] = None,
    index: int = 0,
    seed: Optional[float] = None,
) -> SolveOutcome:
    """Continue the constant root of g in ``window`` from λ=0 to a fixed point of M(1, ·).

    Non-convergence and window exit come back as a FailureReport.
    """
    settings = settings or SolverSettings()
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ConfigurationError(f"window ({lo:g}, {hi:g}) is empty")
    inside = lambda value: lo < value < hi  # noqa: E731
    # solutions starting in the window stay within a·T of it
    reach = pb.a * pb.period
    pb.check_finite(lo - reach, hi + reach, settings.seed_samples)

    root = seed if seed is not None else seed_root(pb.g, (lo, hi), settings.seed_samples)
    if root is None or not inside(root):
        return FailureReport(index, (lo, hi), "g has no sign change inside the window")

    hmap = HomotopyMap(pb, settings.tol_qphi)
    x = GridFunction.constant(pb.mesh, root)
    base_step = 1.0 / max(1, settings.lambda_steps)
    step = base_step
    lam = 0.0
    trace = [0.0]
    iterations = 0
    newton_total = 0

    converged, x, defect, its, nsteps = _correct(hmap, 0.0, x, settings)
    iterations += its
    newton_total += nsteps

    def failure(reason: str, at: float, state_x: GridFunction, state_defect: float) -> FailureReport:
        qnf = projector_Q(nemytskii(pb, state_x, delta_derivative(state_x)))
        logger.warning("window %d (%g, %g) failed: %s", index, lo, hi, reason)
        return FailureReport(
            index,
            (lo, hi),
            reason,
            HomotopyState(at, state_x, state_defect, qnf),
            iterations,
            trace,
            hmap.evaluations,
            hmap.bound_violations,
        )

    if not converged:
        return failure("constant seed is not a fixed point of M(0, ·)", 0.0, x, defect)

    while lam < 1.0:
        target = min(1.0, lam + step)
        converged, candidate, defect, its, nsteps = _correct(hmap, target, x, settings)
        iterations += its
        newton_total += nsteps
        if converged and inside(float(candidate.values[0])):
            lam, x = target, candidate
            trace.append(lam)
            step = min(base_step, 2.0 * step)
            logger.debug("window %d: λ=%.5f accepted (defect %.3g)", index, lam, defect)
            continue
        step *= 0.5
        if step < settings.min_lambda_step:
            reason = "iterate left the window" if converged else "fixed-point iteration did not converge"
            return failure(f"{reason} at λ={target:.6g}", target, candidate, defect)

    if settings.newton:
        _, x, _, nsteps = _newton(hmap, 1.0, x, settings.tol_newton, settings)
        newton_total += nsteps

    y, v = hmap(1.0, x)
    defect = _defect(x, y, v)
    xd = delta_derivative(x)
    qnf = projector_Q(nemytskii(pb, x, xd))
    if not defect < settings.tol_fp:
        return failure(f"final defect {defect:.3g} above tolerance", 1.0, x, defect)
    if not abs(qnf) < settings.tol_fp:
        return failure(f"Q(N_f(x)) = {qnf:.3g} is not zero", 1.0, x, defect)
    if not inside(float(x.values[0])):
        return failure("solution left the window", 1.0, x, defect)
    if not xd.sup_norm() < pb.a:
        return failure("|x^Δ| reached a", 1.0, x, defect)
    residual_eq = equation_residual(pb, x)
    if not residual_eq < settings.tol_eq:
        return failure(f"equation residual {residual_eq:.3g} above {settings.tol_eq:g}", 1.0, x, defect)

    logger.info(
        "window %d (%g, %g): x(0)=%.12g residual_eq=%.3g defect=%.3g",
        index, lo, hi, float(x.values[0]), residual_eq, defect,
    )
    return SolutionRecord(
        window_index=index,
        window=(lo, hi),
        x=x,
        x_delta=xd,
        residual_eq=residual_eq,
        residual_fp=defect,
        qnf=qnf,
        iterations=iterations,
        lambda_steps=len(trace) - 1,
        lambda_trace=trace,
        evaluations=hmap.evaluations,
        bound_violations=hmap.bound_violations,
        newton_steps=newton_total,
        seed=float(root),
    )


def windows_from_alphas(alphas: Sequence[float]) -> List[Window]:
    values = [float(a) for a in alphas]
    if len(values) < 2:
        raise ConfigurationError("alphas need at least two entries (one window)")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigurationError(f"alphas must be strictly increasing, got {values}")
    return list(zip(values[:-1], values[1:]))


def multi_solve(
    pb: Problem,
    alphas: Sequence[float],
    settings: Optional[SolverSettings] = None,
    progress: bool = False,
) -> List[SolveOutcome]:
    """Solve every window (α_j, α_{j+1}) independently; results sorted by window."""
    settings = settings or SolverSettings()
    windows = windows_from_alphas(alphas)
    outcomes: List[SolveOutcome] = []
    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        futures = [pool.submit(homotopy_solve, pb, window, settings, j) for j, window in enumerate(windows)]
        for future in tqdm(as_completed(futures), total=len(futures), desc="Solving windows", disable=not progress):
            outcomes.append(future.result())
    outcomes.sort(key=lambda outcome: outcome.window_index)

    starts = [outcome.x0 for outcome in outcomes if isinstance(outcome, SolutionRecord)]
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise RuntimeError("solutions from disjoint windows are not distinct")
    logger.info("%d of %d windows solved", len(starts), len(windows))
    return outcomes
