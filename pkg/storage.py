"""Persistence of solutions, failure reports, check reports, sweeps and run manifests."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np

from models import CheckReport, FailureReport, RunManifest, SolutionRecord
from timescale import GridFunction, TimeScale, delta_derivative

logger = logging.getLogger(__name__)

SOLUTION_HEADER = ["t", "x", "x_delta"]
SWEEP_HEADER = [
    "value",
    "check_passed",
    "windows",
    "solutions",
    "failures",
    "max_residual_eq",
    "max_residual_fp",
]


def _fmt(value: float) -> str:
    return "%.17g" % value


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def save_grid_csv(x: GridFunction, x_delta: GridFunction, path: Path) -> Path:
    path = _prepare(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SOLUTION_HEADER)
        for t, value, slope in zip(x.mesh.nodes, x.values, x_delta.values):
            writer.writerow([_fmt(t), _fmt(value), _fmt(slope)])
    return path


def save_json(data: Dict[str, Any], path: Path) -> Path:
    path = _prepare(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path


def save_solution(record: SolutionRecord, timescale: TimeScale, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    csv_path = save_grid_csv(record.x, record.x_delta, out_dir / f"solution_w{record.window_index}.csv")
    meta = record.to_dict()
    meta["timescale"] = timescale.describe()
    meta["columns"] = SOLUTION_HEADER
    json_path = save_json(meta, out_dir / f"solution_w{record.window_index}.json")
    logger.info("Saved window %d solution to %s", record.window_index, csv_path)
    return [csv_path, json_path]


def save_failure(report: FailureReport, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    paths = [save_json(report.to_dict(), out_dir / f"failure_w{report.window_index}.json")]
    if report.state is not None:
        x = report.state.x
        paths.append(save_grid_csv(x, delta_derivative(x), out_dir / f"failure_w{report.window_index}.csv"))
    logger.info("Saved window %d failure report to %s", report.window_index, paths[0])
    return paths


def save_check_report(report: CheckReport, out_dir: Path) -> Path:
    path = save_json(report.to_dict(), Path(out_dir) / "check_report.json")
    logger.info("Saved check report to %s", path)
    return path


def save_sweep(rows: Iterable[Dict[str, Any]], path: Path) -> Path:
    path = _prepare(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow(
                [
                    _fmt(row["value"]),
                    "yes" if row["check_passed"] else "no",
                    row["windows"],
                    row["solutions"],
                    row["failures"],
                    _fmt(row["max_residual_eq"]) if row["max_residual_eq"] is not None else "",
                    _fmt(row["max_residual_fp"]) if row["max_residual_fp"] is not None else "",
                ]
            )
    logger.info("Saved sweep summary to %s", path)
    return path


def save_manifest(manifest: RunManifest, out_dir: Path) -> Path:
    return save_json(manifest.to_dict(), Path(out_dir) / "manifest.json")


def load_solution_csv(path: Path) -> Dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [row for row in reader]
    return {column: np.array([float(row[column]) for row in rows]) for column in SOLUTION_HEADER}
