"""Environment-based settings for the periodic solver."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

from dotenv import load_dotenv

load_dotenv()

VERSION = "0.3.0"
ENV_PREFIX = "PHIPER_"


def _env(name: str) -> Optional[str]:
    raw = os.getenv(ENV_PREFIX + name)
    if raw is None or not raw.strip():
        return None
    return raw.strip()


def _parse_bool(raw: str) -> bool:
    return raw.lower() not in {"0", "false", "no"}


@dataclass(frozen=True)
class SolverSettings:
    mesh_dt: Optional[float] = None
    tol_fp: float = 1e-9
    tol_eq: float = 1e-6
    tol_qphi: float = 1e-13
    lambda_steps: int = 32
    min_lambda_step: float = 1.0 / 1024
    max_picard: int = 200
    theta_min: float = 1.0 / 64
    newton: bool = True
    tol_newton: float = 1e-12
    newton_maxiter: int = 60
    seed_samples: int = 512
    workers: int = 1

    def updated(self, **overrides: Any) -> "SolverSettings":
        """Copy with every non-None override applied."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return dataclasses.replace(self, **changes) if changes else self

    @classmethod
    def from_mapping(cls, data: Dict[str, Any], base: Optional["SolverSettings"] = None) -> "SolverSettings":
        base = base or cls()
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown solver settings: {', '.join(unknown)}")
        return base.updated(**data)

    @classmethod
    def from_env(cls, base: Optional["SolverSettings"] = None) -> "SolverSettings":
        base = base or cls()
        newton = _env("NEWTON")
        return base.updated(
            mesh_dt=float(_env("MESH_DT")) if _env("MESH_DT") else None,
            tol_fp=float(_env("TOL_FP")) if _env("TOL_FP") else None,
            tol_eq=float(_env("TOL_EQ")) if _env("TOL_EQ") else None,
            tol_qphi=float(_env("TOL_QPHI")) if _env("TOL_QPHI") else None,
            lambda_steps=int(_env("LAMBDA_STEPS")) if _env("LAMBDA_STEPS") else None,
            newton=_parse_bool(newton) if newton is not None else None,
            workers=int(_env("WORKERS")) if _env("WORKERS") else None,
        )


@dataclass(frozen=True)
class RunSettings:
    out_dir: Optional[str]
    seed: int
    log_level: str

    @classmethod
    def from_env(cls) -> "RunSettings":
        return cls(
            out_dir=_env("OUT_DIR"),
            seed=int(_env("SEED") or "0"),
            log_level=(_env("LOG_LEVEL") or "INFO").upper(),
        )
