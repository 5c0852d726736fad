"""CLI entry for checking and solving periodic φ-Laplacian scenarios."""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence

from catalog import make_function
from config import VERSION, RunSettings, SolverSettings
from errors import ConfigurationError, PreconditionError, TimeScaleDomainError
from hypothesis_checker import METHODS, check_monotone_integral_lemma, check_window_spacing, check_windows
from models import CheckReport, RunManifest, SolutionRecord
from oracle import oracle_windows
from periodic_solver import Problem, multi_solve
from scenario import SWEEP_PARAMETERS, Scenario, parse_scenario, sweep_values
from storage import save_check_report, save_failure, save_grid_csv, save_manifest, save_solution, save_sweep
from timescale import delta_derivative

RUN = RunSettings.from_env()
logging.basicConfig(level=RUN.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_HYPOTHESIS_FAILURE = 2
EXIT_CONFIGURATION_ERROR = 3


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _settings(args: argparse.Namespace, scenario: Scenario) -> SolverSettings:
    base = SolverSettings.from_env(scenario.solver)
    return base.updated(
        mesh_dt=args.mesh_dt,
        tol_fp=args.tol_fp,
        tol_eq=args.tol_eq,
        lambda_steps=args.lambda_steps,
        workers=args.workers,
    )


def _seed(args: argparse.Namespace) -> int:
    return args.seed if args.seed is not None else RUN.seed


def _out_dir(args: argparse.Namespace, scenario: Scenario) -> Path:
    return Path(args.out_dir or RUN.out_dir or scenario.out_dir or Path("results") / scenario.name)


def run_check(scenario: Scenario, problem: Problem, seed: int) -> CheckReport:
    """Window certificates for the scenario's alphas plus the optional lemma trials."""
    options = scenario.check
    lemma = None
    if scenario.lemma is not None:
        lemma = check_monotone_integral_lemma(
            make_function(scenario.lemma.h, problem.period, "lemma.h"),
            problem.mesh,
            trials=scenario.lemma.trials,
            orientation=scenario.lemma.orientation,
            seed=seed,
            amplitude=scenario.lemma.amplitude,
        )
    if not scenario.alphas:
        if lemma is None:
            raise ConfigurationError("scenario has neither alphas nor a lemma block to check")
        return CheckReport(
            method="lemma",
            certificates=[],
            spacing=check_window_spacing([0.0, problem.a * problem.period], problem.a, problem.period),
            lemma=lemma,
        )
    report = check_windows(
        problem,
        scenario.alphas,
        method=options.method,
        samples=options.samples,
        gammas=options.gammas,
        trials=options.trials,
        seed=options.seed if options.seed is not None else seed,
        orientation=options.orientation,
        margin=options.margin,
    )
    report.lemma = lemma
    return report


def print_check(report: CheckReport) -> None:
    print(f"Check ({report.method}): {'PASS' if report.passed else 'FAIL'}" + ("" if report.proof else " (not a proof)"))
    for cert in report.certificates:
        gamma = f" gamma={cert.gamma:.6g}" if cert.gamma is not None else ""
        print(
            f"  alpha_{cert.j}={cert.alpha:.6g} strip=({cert.strip[0]:.6g}, {cert.strip[1]:.6g}) "
            f"{cert.condition} sigma={cert.orientation:+d} margin={cert.min_margin:.3g}{gamma} "
            f"{'ok' if cert.passed else 'FAIL'}"
        )
    spacing = report.spacing
    if spacing.slacks:
        print(f"  spacing aT={spacing.required:.6g} min slack={spacing.min_slack:.3g} {'ok' if spacing.passed else 'FAIL'}")
    if report.degrees:
        print(f"  window degrees: {report.degrees}")
    if report.lemma is not None:
        lemma = report.lemma
        print(f"  lemma ({lemma.orientation}, {lemma.trials} trials): {'ok' if lemma.passed else 'FAIL'}")


def cmd_check(args: argparse.Namespace) -> int:
    scenario = parse_scenario(args.scenario)
    settings = _settings(args, scenario)
    problem = scenario.build_problem(settings)
    if args.method:
        scenario.check.method = args.method
    report = run_check(scenario, problem, _seed(args))
    save_check_report(report, _out_dir(args, scenario))
    print_check(report)
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS_FAILURE


def _solve_into(
    scenario: Scenario, problem: Problem, settings: SolverSettings, out_dir: Path, progress: bool
) -> List[dict]:
    outcomes = multi_solve(problem, scenario.alphas, settings, progress=progress)
    rows = []
    for outcome in outcomes:
        if isinstance(outcome, SolutionRecord):
            save_solution(outcome, scenario.timescale, out_dir)
        else:
            save_failure(outcome, out_dir)
        rows.append(outcome.to_dict())
    return rows


def cmd_solve(args: argparse.Namespace) -> int:
    started = _now()
    scenario = parse_scenario(args.scenario)
    if not scenario.alphas:
        raise ConfigurationError("solve needs alphas in the scenario")
    settings = _settings(args, scenario)
    problem = scenario.build_problem(settings)
    out_dir = _out_dir(args, scenario)
    seed = _seed(args)

    report = run_check(scenario, problem, seed)
    save_check_report(report, out_dir)
    print_check(report)
    if not report.passed and not args.force:
        print("Window conditions not certified; rerun with --force to solve anyway.")
        return EXIT_HYPOTHESIS_FAILURE

    rows = _solve_into(scenario, problem, settings, out_dir, progress=True)
    print(f"Windows: {len(rows)}")
    print("Outcomes:", Counter(row["status"] for row in rows))
    for row in rows:
        if row["status"] == "solved":
            print(
                f"  w{row['window_index']}: x(0)={row['x0']:.12g} residual_eq={row['residual_eq']:.3g} "
                f"residual_fp={row['residual_fp']:.3g} lambda_steps={row['lambda_steps']}"
            )
        else:
            print(f"  w{row['window_index']}: FAILED ({row['reason']})")

    manifest = RunManifest(
        scenario_path=scenario.path,
        scenario_hash=scenario.sha256,
        version=VERSION,
        started_at=started,
        seed=seed,
        outcomes=rows,
    )
    manifest.files = sorted(p.name for p in out_dir.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest.finished_at = _now()
    save_manifest(manifest, out_dir)
    logger.info("Saved run manifest to %s", out_dir / "manifest.json")
    failed = any(row["status"] != "solved" for row in rows)
    return EXIT_SOLVER_FAILURE if failed else EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = parse_scenario(args.scenario)
    if not scenario.alphas:
        raise ConfigurationError("sweep needs alphas in the scenario")
    values = sweep_values(args.values, args.range)
    out_dir = _out_dir(args, scenario)
    seed = _seed(args)
    rows = []
    for k, value in enumerate(values):
        row = {"value": value, "check_passed": False, "windows": len(scenario.alphas) - 1, "solutions": 0,
               "failures": 0, "max_residual_eq": None, "max_residual_fp": None}
        try:
            variant = scenario.with_parameter(args.parameter, value)
            settings = _settings(args, variant)
            problem = variant.build_problem(settings)
            report = run_check(variant, problem, seed)
            row["check_passed"] = report.passed
            if report.passed or args.force:
                outcomes = _solve_into(variant, problem, settings, out_dir / f"sweep_{k}", progress=False)
                solved = [o for o in outcomes if o["status"] == "solved"]
                row["solutions"] = len(solved)
                row["failures"] = len(outcomes) - len(solved)
                if solved:
                    row["max_residual_eq"] = max(o["residual_eq"] for o in solved)
                    row["max_residual_fp"] = max(o["residual_fp"] for o in solved)
        except (ConfigurationError, PreconditionError) as exc:
            logger.warning("sweep point %s=%g skipped: %s", args.parameter, value, exc)
        rows.append(row)
        print(
            f"  {args.parameter}={value:.6g}: check {'pass' if row['check_passed'] else 'fail'}, "
            f"{row['solutions']} solution(s), {row['failures']} failure(s)"
        )
    save_sweep(rows, out_dir / "sweep.csv")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    scenario = parse_scenario(args.scenario)
    if not scenario.alphas:
        raise ConfigurationError("oracle needs alphas in the scenario")
    settings = _settings(args, scenario)
    problem = scenario.build_problem(settings)
    out_dir = _out_dir(args, scenario)
    results = oracle_windows(problem, scenario.alphas, settings.seed_samples)
    for result in results:
        if result.x is not None and result.success:
            save_grid_csv(result.x, delta_derivative(result.x), out_dir / f"oracle_w{result.window_index}.csv")
            print(f"  w{result.window_index}: x(0)={float(result.x.values[0]):.12g} residual={result.residual:.3g}")
        else:
            print(f"  w{result.window_index}: FAILED ({result.message})")
    return EXIT_OK if all(r.success for r in results) else EXIT_SOLVER_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Periodic solutions of singular φ-Laplacian equations on time scales")
    parser.add_argument("--version", action="version", version=VERSION)
    parser.add_argument("--log-level", default=None, help="logging level (default from PHIPER_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario", help="scenario YAML file")
        p.add_argument("--mesh-dt", type=float, default=None, help="largest mesh step inside interval cells")
        p.add_argument("--tol-fp", type=float, default=None, help="fixed-point defect tolerance (C1 norm)")
        p.add_argument("--tol-eq", type=float, default=None, help="equation residual tolerance")
        p.add_argument("--lambda-steps", type=int, default=None, help="uniform homotopy steps")
        p.add_argument("--workers", type=int, default=None, help="parallel window solves")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
        p.add_argument("--out-dir", default=None, help="output directory")

    check = sub.add_parser("check", help="certify the window conditions")
    common(check)
    check.add_argument("--method", choices=METHODS, default=None)
    check.set_defaults(handler=cmd_check)

    solve = sub.add_parser("solve", help="check, then solve every window")
    common(solve)
    solve.add_argument("--force", action="store_true", help="solve even if the check fails")
    solve.set_defaults(handler=cmd_solve)

    sweep = sub.add_parser("sweep", help="re-run check and solve over a parameter range")
    common(sweep)
    sweep.add_argument("--force", action="store_true", help="solve sweep points whose check fails")
    sweep.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    sweep.add_argument("--values", type=float, nargs="+", default=None)
    sweep.add_argument("--range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"), default=None)
    sweep.set_defaults(handler=cmd_sweep)

    oracle = sub.add_parser("oracle", help="direct nodal solve for regression baselines")
    common(oracle)
    oracle.set_defaults(handler=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.getLogger().setLevel(args.log_level.upper())
    try:
        return args.handler(args)
    except (ConfigurationError, PreconditionError, TimeScaleDomainError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIGURATION_ERROR


if __name__ == "__main__":
    sys.exit(main())
