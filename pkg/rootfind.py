"""Bracketing root finders shared by the operators and the solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BisectionResult:
    root: float
    lo: float
    hi: float
    iterations: int
    residual: float


def bisection(
    fn: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-12,
    max_iter: int = 200,
    ftol: Optional[float] = None,
) -> BisectionResult:
    """Bisection on a sign change of fn over [a, b].

    Stops when the bracket is narrower than ``tol`` or, when ``ftol`` is
    given, as soon as |fn| < ftol. The returned bracket always contains the
    root.
    """
    if a > b:
        raise ValueError("a must be less than b")
    fa = fn(a)
    fb = fn(b)
    if fa == 0.0:
        return BisectionResult(a, a, a, 0, 0.0)
    if fb == 0.0:
        return BisectionResult(b, b, b, 0, 0.0)
    if fa * fb > 0:
        raise ValueError(f"f(a) and f(b) must have different signs (f({a:g})={fa:g}, f({b:g})={fb:g})")

    lo, hi = a, b
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or (ftol is not None and abs(fmid) < ftol):
            return BisectionResult(mid, lo, hi, it, abs(fmid))
        if (fmid > 0) == (fa > 0):
            lo, fa = mid, fmid
        else:
            hi = mid
        mid = 0.5 * (lo + hi)
        # second test: bracket exhausted in floating point
        if hi - lo < tol or not lo < mid < hi:
            return BisectionResult(mid, lo, hi, it, abs(fn(mid)))
    raise RuntimeError(f"bisection did not converge in {max_iter} iterations (bracket [{lo!r}, {hi!r}])")


def sign_changes(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, samples: int) -> List[Tuple[float, float]]:
    """Brackets [x_k, x_{k+1}] of a vectorized fn sampled on ``samples`` points."""
    grid = np.linspace(a, b, max(int(samples), 2))
    values = np.asarray(fn(grid), dtype=float)
    brackets: List[Tuple[float, float]] = []
    for k in range(grid.size - 1):
        if values[k] == 0.0:
            brackets.append((float(grid[k]), float(grid[k])))
        elif values[k] * values[k + 1] < 0:
            brackets.append((float(grid[k]), float(grid[k + 1])))
    if values[-1] == 0.0:
        brackets.append((float(grid[-1]), float(grid[-1])))
    return brackets


def nearest_root(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    samples: int = 512,
    tol: float = 1e-13,
) -> Optional[float]:
    """Root of fn in [a, b] closest to the midpoint, or None without a sign change."""
    brackets = sign_changes(fn, a, b, samples)
    if not brackets:
        return None
    scalar = lambda s: float(np.asarray(fn(np.array([s])), dtype=float)[0])  # noqa: E731
    centre = 0.5 * (a + b)
    roots = []
    for lo, hi in brackets:
        if lo == hi:
            roots.append(lo)
        else:
            roots.append(bisection(scalar, lo, hi, tol=tol).root)
    if len(roots) > 1:
        logger.debug("%d roots in [%g, %g]; choosing the one nearest %g", len(roots), a, b, centre)
    return min(roots, key=lambda s: abs(s - centre))
