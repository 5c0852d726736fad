"""Direct solve of the nodal periodic system, used as a regression baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import root

from periodic_solver import Problem, seed_root, windows_from_alphas
from timescale import GridFunction, shift

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8


@dataclass
class OracleResult:
    window_index: int
    x: Optional[GridFunction]
    residual: float
    success: bool
    message: str
    evaluations: int = 0


def nodal_residual(pb: Problem, values: np.ndarray) -> np.ndarray:
    """(φ(d_{i+1}) − φ(d_i))/h_i − N_i with d_i the forward difference at node i."""
    mesh = pb.mesh
    x = np.asarray(values, dtype=float)
    following = x[mesh.succ]
    d = (following - x) / mesh.steps
    z, _ = pb.phi.forward_clamped(d, warn=False)
    delayed = shift(GridFunction.from_values(mesh, x), pb.r).values
    n = -np.asarray(pb.h(x), dtype=float) * d - np.asarray(pb.g(delayed), dtype=float) + pb.p.values
    return (z[mesh.succ] - z) / mesh.steps - n


def nodal_jacobian(pb: Problem, values: np.ndarray) -> np.ndarray:
    """Forward-difference Jacobian of nodal_residual with absolute steps."""
    x = np.asarray(values, dtype=float)
    base = nodal_residual(pb, x)
    steps = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(x))
    jac = np.empty((base.size, x.size))
    for k in range(x.size):
        bumped = x.copy()
        bumped[k] += steps[k]
        jac[:, k] = (nodal_residual(pb, bumped) - base) / steps[k]
    return jac


def oracle_solve(
    pb: Problem,
    guess: Union[GridFunction, float],
    tol: float = 1e-13,
    index: int = 0,
) -> OracleResult:
    """Dense Newton (MINPACK hybrid) solve of the K nodal equations from ``guess``."""
    mesh = pb.mesh
    if isinstance(guess, GridFunction):
        start = guess.values.copy()
    else:
        start = np.full(mesh.size, float(guess))

    def fun(v: np.ndarray) -> np.ndarray:
        return nodal_residual(pb, v)

    def jac(v: np.ndarray) -> np.ndarray:
        return nodal_jacobian(pb, v)

    solution = root(fun, start, jac=jac, method="hybr", tol=tol)
    if not solution.success:
        logger.info("hybr stalled for window %d (%s); retrying with lm", index, solution.message)
        solution = root(fun, start, jac=jac, method="lm", tol=tol)
    values = np.asarray(solution.x, dtype=float)
    residual = float(np.max(np.abs(nodal_residual(pb, values))))
    d = (values[mesh.succ] - values) / mesh.steps
    success = bool(solution.success) and residual < RESIDUAL_TOL and bool(np.all(np.abs(d) < pb.a))
    if not success:
        logger.warning("oracle solve for window %d did not converge: %s", index, solution.message)
    return OracleResult(
        window_index=index,
        x=GridFunction.from_values(mesh, values),
        residual=residual,
        success=success,
        message=str(solution.message),
        evaluations=int(getattr(solution, "nfev", 0)),
    )


def oracle_windows(pb: Problem, alphas: Sequence[float], samples: int = 512) -> List[OracleResult]:
    results: List[OracleResult] = []
    for j, window in enumerate(windows_from_alphas(alphas)):
        seed = seed_root(pb.g, window, samples)
        if seed is None:
            results.append(OracleResult(j, None, float("nan"), False, "g has no sign change inside the window"))
            continue
        result = oracle_solve(pb, seed, index=j)
        if result.success and not window[0] < float(result.x.values[0]) < window[1]:
            result.success = False
            result.message = "oracle solution left the window"
        results.append(result)
    return results


def compare(a: GridFunction, b: GridFunction) -> Tuple[float, float]:
    """Sup-norm distance of values and of forward differences."""
    mesh = a.mesh
    gap = a.values - b.values
    return float(np.max(np.abs(gap))), float(np.max(np.abs((gap[mesh.succ] - gap) / mesh.steps)))
