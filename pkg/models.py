"""Result records for solves, hypothesis checks and runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from timescale import GridFunction

Window = Tuple[float, float]


@dataclass
class HomotopyState:
    lam: float
    x: GridFunction
    defect: float
    qnf: float

    def to_dict(self) -> Dict[str, Any]:
        return {"lambda": self.lam, "defect": self.defect, "qnf": self.qnf, "x0": float(self.x.values[0])}


@dataclass
class SolutionRecord:
    window_index: int
    window: Window
    x: GridFunction
    x_delta: GridFunction
    residual_eq: float
    residual_fp: float
    qnf: float
    iterations: int
    lambda_steps: int
    lambda_trace: List[float] = field(default_factory=list)
    evaluations: int = 0
    bound_violations: int = 0
    newton_steps: int = 0
    seed: float = 0.0

    @property
    def x0(self) -> float:
        return float(self.x.values[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": "solved",
            "window_index": self.window_index,
            "window": list(self.window),
            "seed_root": self.seed,
            "x0": self.x0,
            "residual_eq": self.residual_eq,
            "residual_fp": self.residual_fp,
            "qnf": self.qnf,
            "iterations": self.iterations,
            "newton_steps": self.newton_steps,
            "lambda_steps": self.lambda_steps,
            "lambda_trace": list(self.lambda_trace),
            "evaluations": self.evaluations,
            "bound_violations": self.bound_violations,
            "max_abs_x_delta": self.x_delta.sup_norm(),
        }


@dataclass
class FailureReport:
    window_index: int
    window: Window
    reason: str
    state: Optional[HomotopyState] = None
    iterations: int = 0
    lambda_trace: List[float] = field(default_factory=list)
    evaluations: int = 0
    bound_violations: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": "failed",
            "window_index": self.window_index,
            "window": list(self.window),
            "reason": self.reason,
            "state": self.state.to_dict() if self.state else None,
            "iterations": self.iterations,
            "lambda_trace": list(self.lambda_trace),
            "evaluations": self.evaluations,
            "bound_violations": self.bound_violations,
        }


SolveOutcome = Union[SolutionRecord, FailureReport]


@dataclass
class WindowCertificate:
    j: int
    alpha: float
    strip: Tuple[float, float]
    condition: str
    passed: bool
    orientation: int = 1
    g_sign: int = 0
    degree_sign: int = 0
    samples: int = 0
    min_margin: float = 0.0
    gamma: Optional[float] = None
    witness: Optional[float] = None
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "j": self.j,
            "alpha": self.alpha,
            "strip": list(self.strip),
            "condition": self.condition,
            "passed": self.passed,
            "orientation": self.orientation,
            "g_sign": self.g_sign,
            "degree_sign": self.degree_sign,
            "samples": self.samples,
            "min_margin": self.min_margin,
            "gamma": self.gamma,
            "witness": self.witness,
            "note": self.note,
        }


@dataclass
class SpacingReport:
    passed: bool
    required: float
    gaps: List[float] = field(default_factory=list)
    slacks: List[float] = field(default_factory=list)

    @property
    def min_slack(self) -> Optional[float]:
        return min(self.slacks) if self.slacks else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "required": self.required,
            "gaps": list(self.gaps),
            "slacks": list(self.slacks),
            "min_slack": self.min_slack,
        }


@dataclass
class LemmaReport:
    orientation: str
    trials: int
    passed: bool
    worst: float
    tolerance: float
    values: List[float] = field(default_factory=list)
    offending_trial: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "orientation": self.orientation,
            "trials": self.trials,
            "passed": self.passed,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "offending_trial": self.offending_trial,
        }


@dataclass
class CheckReport:
    method: str
    certificates: List[WindowCertificate]
    spacing: SpacingReport
    degrees: List[int] = field(default_factory=list)
    lemma: Optional[LemmaReport] = None
    proof: bool = True
    spacing_required: bool = True

    @property
    def degrees_alternate(self) -> bool:
        if any(d == 0 for d in self.degrees):
            return False
        return all(a == -b for a, b in zip(self.degrees, self.degrees[1:]))

    @property
    def passed(self) -> bool:
        lemma_ok = self.lemma is None or self.lemma.passed
        spacing_ok = self.spacing.passed or not self.spacing_required
        return all(c.passed for c in self.certificates) and spacing_ok and lemma_ok and self.degrees_alternate

    @property
    def counterexamples(self) -> List[Dict[str, Any]]:
        return [
            {"j": c.j, "witness": c.witness, "margin": c.min_margin}
            for c in self.certificates
            if not c.passed and c.witness is not None
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "passed": self.passed,
            "proof": self.proof,
            "certificates": [c.to_dict() for c in self.certificates],
            "spacing": self.spacing.to_dict(),
            "degrees": list(self.degrees),
            "degrees_alternate": self.degrees_alternate,
            "spacing_required": self.spacing_required,
            "lemma": self.lemma.to_dict() if self.lemma else None,
            "counterexamples": self.counterexamples,
        }


@dataclass
class RunManifest:
    scenario_path: str
    scenario_hash: str
    version: str
    started_at: str
    finished_at: str = ""
    seed: int = 0
    outcomes: List[Dict[str, Any]] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario_path,
            "scenario_sha256": self.scenario_hash,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "seed": self.seed,
            "outcomes": list(self.outcomes),
            "files": list(self.files),
        }
