from __future__ import annotations

import csv
import json
import logging
import math
import textwrap
from pathlib import Path

import numpy as np
import pytest

import main
from config import SolverSettings
from conftest import SCENARIOS
from errors import ScenarioError
from periodic_solver import projector_Q
from scenario import parse_number, parse_scenario, sweep_values
from storage import load_solution_csv
from timescale import Interval

PENDULUM = textwrap.dedent(
    """\
    name: small_pendulum
    timescale:
      period: {period}
    phi: {{kind: relativistic, c: 1}}
    h: {{kind: constant, value: 0.1}}
    g: {{kind: sin}}
    {forcing}
    alphas: {alphas}
    check:
      method: near_constant
    solver:
      mesh_steps: 64
    """
)


def write_scenario(tmp_path: Path, text: str, name: str = "scenario.yaml") -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def pendulum_scenario(tmp_path: Path, period: str = "0.9pi", forcing: str = "", alphas: str = "[-0.5pi, 0.5pi, 1.5pi]") -> str:
    return write_scenario(tmp_path, PENDULUM.format(period=period, forcing=forcing, alphas=alphas))


def run(*argv: str) -> int:
    return main.main(list(argv))


@pytest.mark.parametrize(
    "raw, expected",
    [
        (2, 2.0),
        ("3/16", 0.1875),
        ("pi", math.pi),
        ("-pi", -math.pi),
        ("0.9pi", 0.9 * math.pi),
        ("2*pi", 2 * math.pi),
        ("-0.5pi", -0.5 * math.pi),
        ("1e-3", 1e-3),
    ],
)
def test_parse_number(raw, expected):
    assert parse_number(raw) == pytest.approx(expected)


@pytest.mark.parametrize("raw", [True, "abc", None, "1/0"])
def test_parse_number_rejects(raw):
    with pytest.raises(ValueError):
        parse_number(raw)


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.yaml")))
def test_bundled_scenarios_parse(name):
    scenario = parse_scenario(str(SCENARIOS / name))
    assert scenario.name == Path(name).stem
    assert len(scenario.sha256) == 64
    pb = scenario.build_problem()
    assert abs(projector_Q(pb.p)) < 1e-10 * max(1.0, pb.p.sup_norm())


def test_pendulum_scenario_has_a_equal_to_c():
    scenario = parse_scenario(str(SCENARIOS / "pendulum_relativistic.yaml"))
    pb = scenario.build_problem()
    assert pb.a == 1.0
    assert pb.period == pytest.approx(0.9 * math.pi)
    assert scenario.solver.mesh_dt == pytest.approx(pb.period / 512)
    assert len(scenario.alphas) == 5


def test_hybrid_scenario_cells():
    scenario = parse_scenario(str(SCENARIOS / "hybrid_arctan.yaml"))
    assert scenario.timescale.describe() == {
        "period": 0.5,
        "cells": [[0.0, 0.125], 0.1875, 0.25, [0.3125, 0.375], [0.4375, 0.5]],
    }


def test_empty_cells_are_rejected_with_line(tmp_path):
    path = write_scenario(
        tmp_path,
        "name: empty\ntimescale:\n  period: 1\n  cells: []\nphi: {kind: relativistic, c: 1}\nh: {kind: constant}\ng: {kind: sin}\n",
    )
    with pytest.raises(ScenarioError) as err:
        parse_scenario(path)
    assert err.value.line == 4
    assert "at least one cell" in str(err.value)


def test_forcing_mean_is_logged_and_removed(tmp_path, caplog):
    path = pendulum_scenario(tmp_path, forcing="p: {kind: cos, amplitude: 0.2, cycles: 1, offset: 0.3}")
    with caplog.at_level(logging.INFO):
        scenario = parse_scenario(path)
    assert "re-centered by 0.3" in caplog.text
    pb = scenario.build_problem()
    assert pb.forcing_offset == pytest.approx(0.3)
    assert abs(projector_Q(pb.p)) < 1e-12


def test_incommensurable_delay_is_rejected(tmp_path):
    text = (SCENARIOS / "hybrid_arctan.yaml").read_text(encoding="utf-8") + "delay: 0.1\n"
    with pytest.raises(ScenarioError, match="commensurable"):
        parse_scenario(write_scenario(tmp_path, text))


def test_unknown_solver_key_is_rejected(tmp_path):
    text = PENDULUM.format(period="0.9pi", forcing="", alphas="[-0.5pi, 0.5pi]") + "  bogus: 1\n"
    with pytest.raises(ScenarioError, match="bogus"):
        parse_scenario(write_scenario(tmp_path, text))


def test_unknown_function_kind_is_rejected(tmp_path):
    text = PENDULUM.format(period="0.9pi", forcing="", alphas="[-0.5pi, 0.5pi]").replace("kind: sin", "kind: sine")
    with pytest.raises(ScenarioError, match="unknown g kind"):
        parse_scenario(write_scenario(tmp_path, text))


def test_decreasing_alphas_are_rejected(tmp_path):
    with pytest.raises(ScenarioError, match="strictly increasing"):
        parse_scenario(pendulum_scenario(tmp_path, alphas="[1, 0]"))


def test_sweep_values():
    assert sweep_values([1.0, 2.0], None) == [1.0, 2.0]
    assert sweep_values(None, [0.0, 1.0, 5]) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert sweep_values(None, [2.0, 2.0, 4]) == [2.0]


def test_environment_overrides_scenario(monkeypatch):
    monkeypatch.setenv("PHIPER_TOL_EQ", "1e-7")
    monkeypatch.setenv("PHIPER_NEWTON", "false")
    settings = SolverSettings.from_env(SolverSettings(tol_eq=1e-3, lambda_steps=8))
    assert settings.tol_eq == 1e-7
    assert settings.newton is False
    assert settings.lambda_steps == 8


def test_check_exit_codes(tmp_path):
    assert run("check", str(SCENARIOS / "hybrid_arctan.yaml"), "--out-dir", str(tmp_path / "ok")) == 0
    report = json.loads((tmp_path / "ok" / "check_report.json").read_text(encoding="utf-8"))
    assert report["passed"] is True and report["method"] == "monotone"

    wide = pendulum_scenario(tmp_path, period="1.1pi")
    assert run("check", wide, "--out-dir", str(tmp_path / "wide")) == 2


def test_lemma_only_check_passes(tmp_path):
    assert run("check", str(SCENARIOS / "jump_example.yaml"), "--out-dir", str(tmp_path)) == 0
    report = json.loads((tmp_path / "check_report.json").read_text(encoding="utf-8"))
    assert report["lemma"]["passed"] is True


def test_solve_refuses_uncertified_windows(tmp_path):
    wide = pendulum_scenario(tmp_path, period="1.1pi")
    assert run("solve", wide, "--out-dir", str(tmp_path)) == 2
    assert not list(tmp_path.glob("solution_w*.csv"))


def test_solver_failure_exit_code(tmp_path):
    path = pendulum_scenario(tmp_path, alphas="[0.1, 3.0]")
    assert run("solve", path, "--force", "--out-dir", str(tmp_path)) == 1
    failure = json.loads((tmp_path / "failure_w0.json").read_text(encoding="utf-8"))
    assert failure["status"] == "failed"


def test_configuration_error_exit_code(tmp_path):
    path = write_scenario(tmp_path, "timescale:\n  period: 1\n  cells: []\n")
    assert run("check", path) == 3
    assert run("check", str(tmp_path / "missing.yaml")) == 3


def test_unforced_pendulum_solutions_are_equilibria(tmp_path):
    path = pendulum_scenario(tmp_path)
    assert run("solve", path, "--out-dir", str(tmp_path)) == 0
    for index, level in enumerate((0.0, math.pi)):
        columns = load_solution_csv(tmp_path / f"solution_w{index}.csv")
        np.testing.assert_allclose(columns["x"], level, atol=1e-10)
        assert np.all(np.abs(columns["x_delta"]) < 1.0)
    with open(tmp_path / "solution_w0.csv", encoding="utf-8") as fh:
        assert next(csv.reader(fh)) == ["t", "x", "x_delta"]
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert [o["status"] for o in manifest["outcomes"]] == ["solved", "solved"]
    assert "solution_w1.csv" in manifest["files"]
    assert manifest["scenario_sha256"] == parse_scenario(path).sha256


def test_solve_is_deterministic(tmp_path):
    scenario = str(SCENARIOS / "pendulum_relativistic.yaml")
    assert run("solve", scenario, "--seed", "5", "--out-dir", str(tmp_path / "a")) == 0
    assert run("solve", scenario, "--seed", "5", "--out-dir", str(tmp_path / "b")) == 0
    for index in range(4):
        name = f"solution_w{index}.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_over_c_flips_at_the_spacing_boundary(tmp_path):
    scenario = str(SCENARIOS / "pendulum_relativistic.yaml")
    code = run(
        "sweep", scenario, "--parameter", "c", "--values", "0.9", "1.2",
        "--mesh-dt", "0.05", "--out-dir", str(tmp_path),
    )
    assert code == 0
    with open(tmp_path / "sweep.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [row["check_passed"] for row in rows] == ["yes", "no"]
    assert rows[0]["solutions"] == "4"
    assert rows[1]["solutions"] == "0"


def test_unit_forcing_sweep_reproduces_solve(tmp_path):
    scenario = str(SCENARIOS / "discrete_regression.yaml")
    assert run("solve", scenario, "--out-dir", str(tmp_path / "solve")) == 0
    assert run("sweep", scenario, "--parameter", "forcing", "--values", "1", "--out-dir", str(tmp_path / "sweep")) == 0
    solved = (tmp_path / "solve" / "solution_w0.csv").read_bytes()
    swept = (tmp_path / "sweep" / "sweep_0" / "solution_w0.csv").read_bytes()
    assert solved == swept


def test_oracle_matches_solve_on_discrete_scenario(tmp_path):
    scenario = str(SCENARIOS / "discrete_regression.yaml")
    assert run("solve", scenario, "--out-dir", str(tmp_path)) == 0
    assert run("oracle", scenario, "--out-dir", str(tmp_path)) == 0
    solved = load_solution_csv(tmp_path / "solution_w0.csv")
    baseline = load_solution_csv(tmp_path / "oracle_w0.csv")
    np.testing.assert_array_equal(solved["t"], baseline["t"])
    assert np.max(np.abs(solved["x"] - baseline["x"])) < 1e-8


def test_missing_cells_default_to_the_real_line(tmp_path):
    scenario = parse_scenario(pendulum_scenario(tmp_path))
    assert scenario.timescale.cells == (Interval(0.0, scenario.timescale.period),)
    assert scenario.timescale.period == pytest.approx(0.9 * math.pi)


def test_null_cell_is_rejected_with_line(tmp_path):
    path = write_scenario(
        tmp_path,
        "name: hole\ntimescale:\n  period: 1\n  cells: [~]\nphi: {kind: relativistic, c: 1}\nh: {kind: constant}\ng: {kind: sin}\n",
    )
    with pytest.raises(ScenarioError, match="expected a number") as err:
        parse_scenario(path)
    assert err.value.line == 4
    assert run("check", path) == 3


def test_invalid_utf8_is_a_configuration_error(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_bytes(b"name: \xff\xfe\ntimescale:\n  period: 1\n")
    with pytest.raises(ScenarioError, match="UTF-8"):
        parse_scenario(str(path))
    assert run("check", str(path)) == 3


def test_force_is_only_accepted_where_it_matters(tmp_path):
    with pytest.raises(SystemExit):
        run("check", str(SCENARIOS / "hybrid_arctan.yaml"), "--force")
    with pytest.raises(SystemExit):
        run("oracle", str(SCENARIOS / "discrete_regression.yaml"), "--force")


def test_delayed_cubic_scenario_solves(tmp_path):
    assert run("solve", str(SCENARIOS / "cubic_delay.yaml"), "--out-dir", str(tmp_path)) == 0
    meta = json.loads((tmp_path / "solution_w0.json").read_text(encoding="utf-8"))
    assert meta["residual_eq"] < 1e-6
    assert -10.0 < meta["x0"] < 10.0
