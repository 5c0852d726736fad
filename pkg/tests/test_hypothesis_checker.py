from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import PENDULUM_ALPHAS, discrete_timescale, hybrid_timescale, jump_timescale, pendulum
from errors import ConfigurationError
from hypothesis_checker import (
    alphas_from_zeros,
    check_corollary_monotone,
    check_corollary_near_constant,
    check_monotone_integral_lemma,
    check_window_spacing,
    check_windows,
    friction_work,
    strip_samples,
    window_degrees,
)
from models import SolutionRecord
from periodic_solver import Problem, multi_solve
from phi_operators import relativistic
from timescale import GridFunction, Mesh, TimeScale, delta_derivative, delta_integral


def hybrid_example(sign: float = 1.0) -> Problem:
    return Problem.build(
        hybrid_timescale(),
        relativistic(1.0),
        lambda x: sign * np.exp(-np.asarray(x) ** 2),
        lambda x: sign * np.arctan(x),
        lambda t: np.sin(4 * math.pi * t),
        dt_max=1 / 64,
    )


def cubic_example(friction) -> Problem:
    return Problem.build(
        TimeScale.continuous(2 * math.pi), relativistic(1.0), friction, lambda x: np.asarray(x) ** 3, np.cos,
        dt_max=2 * math.pi / 64,
    )


def oscillating_friction() -> Problem:
    ts = TimeScale.continuous(0.9 * math.pi)
    return Problem.build(ts, relativistic(1.0), lambda x: 2.0 * np.sin(5 * np.asarray(x)), np.sin, dt_max=ts.period / 64)


def test_hybrid_example_passes_monotone_check():
    report = check_corollary_monotone(hybrid_example(), [-10.0, 10.0])
    assert report.passed
    assert [c.orientation for c in report.certificates] == [-1, -1]
    assert report.degrees == [1]
    assert all(c.samples >= 64 and c.min_margin > 0 for c in report.certificates)
    assert report.certificates[0].strip == pytest.approx((-10.25, -9.75))


def test_reversed_sign_flips_g_sign_but_not_the_verdict():
    plain = check_corollary_monotone(hybrid_example(), [-10.0, 10.0])
    flipped = check_corollary_monotone(hybrid_example(-1.0), [-10.0, 10.0])
    assert flipped.passed == plain.passed
    assert [c.g_sign for c in flipped.certificates] == [-c.g_sign for c in plain.certificates]
    assert [c.orientation for c in flipped.certificates] == [1, 1]


def test_pendulum_passes_near_constant_check():
    report = check_corollary_near_constant(pendulum(forcing=0.2, steps=64), PENDULUM_ALPHAS)
    assert report.passed
    assert all(c.gamma == pytest.approx(0.1) for c in report.certificates)
    assert report.degrees == [1, -1, 1, -1]
    assert report.degrees_alternate
    assert [c.degree_sign for c in report.certificates] == [1, -1, 1, -1, 1]


def test_constant_friction_passes_monotone_check_in_either_orientation():
    pb = pendulum(steps=64)
    assert check_corollary_monotone(pb, PENDULUM_ALPHAS).passed


def test_pendulum_at_the_spacing_boundary():
    at_boundary = check_corollary_near_constant(pendulum(period=math.pi, steps=64), PENDULUM_ALPHAS)
    assert at_boundary.passed
    assert at_boundary.spacing.min_slack == pytest.approx(0.0, abs=1e-12)
    beyond = check_corollary_near_constant(pendulum(period=math.pi + 0.1, steps=64), PENDULUM_ALPHAS)
    assert not beyond.passed
    assert not beyond.spacing.passed


def test_spacing_flips_exactly_at_the_gap():
    alphas = [(2 * j + 1) * math.pi / 2 for j in range(-1, 4)]
    assert check_window_spacing(alphas, 1.0, math.pi).passed
    assert check_window_spacing(alphas, 1.0, math.pi * (1 - 1e-9)).passed
    assert not check_window_spacing(alphas, 1.0, math.pi * (1 + 1e-9)).passed
    assert check_window_spacing([0.0, 5.0], 1.0, 5.0).passed


def test_oscillating_friction_fails_with_witness():
    pb = oscillating_friction()
    report = check_corollary_near_constant(pb, PENDULUM_ALPHAS)
    assert not report.passed
    failing = [c for c in report.certificates if not c.passed]
    assert failing and all(c.witness is not None for c in failing)
    assert report.counterexamples


def test_failing_strip_keeps_failing_when_sampling_doubles():
    pb = oscillating_friction()
    coarse = check_corollary_near_constant(pb, PENDULUM_ALPHAS, samples=64, orientation=-1)
    fine = check_corollary_near_constant(pb, PENDULUM_ALPHAS, samples=128, orientation=-1)
    for c, f in zip(coarse.certificates, fine.certificates):
        if not c.passed:
            assert not f.passed
            assert np.any(np.isclose(strip_samples(*f.strip, 128), c.witness, rtol=0, atol=1e-12))


def test_strip_samples_nest():
    coarse = strip_samples(0.0, 1.0, 64)
    fine = strip_samples(0.0, 1.0, 128)
    assert np.allclose(coarse, fine[1::2])
    with pytest.raises(ConfigurationError):
        strip_samples(0.0, 1.0, 32)


def test_cubic_example_needs_zero_gammas():
    pb = cubic_example(lambda x: 0.5 * np.asarray(x) ** 3)
    assert check_corollary_near_constant(pb, [-10.0, 10.0], gammas=[0.0, 0.0]).passed
    assert not check_corollary_near_constant(pb, [-10.0, 10.0]).passed


def test_gammas_must_match_alphas():
    pb = cubic_example(lambda x: np.zeros(np.shape(x)))
    with pytest.raises(ConfigurationError):
        check_corollary_near_constant(pb, [-10.0, 10.0], gammas=[0.0])


def test_delay_is_noted_on_certificates():
    pb = Problem.build(
        TimeScale.continuous(2 * math.pi), relativistic(1.0), lambda x: 0.5 * np.asarray(x),
        lambda x: np.asarray(x) ** 3, np.cos, r=0.25 * math.pi, dt_max=2 * math.pi / 64,
    )
    report = check_corollary_near_constant(pb, [-10.0, 10.0])
    assert report.passed
    assert all("delay" in c.note for c in report.certificates)


def test_window_degrees_from_endpoint_signs():
    assert window_degrees(np.sin, PENDULUM_ALPHAS) == [1, -1, 1, -1]
    assert window_degrees(np.arctan, [-1.0, 1.0]) == [1]
    assert window_degrees(np.cos, [-1.0, 1.0]) == [0]


def test_monte_carlo_check_is_evidence_only():
    report = check_windows(hybrid_example(), [-10.0, 10.0], method="monte_carlo", trials=50, seed=3)
    assert report.passed
    assert not report.proof
    assert all(c.note == "sampled, not a proof" for c in report.certificates)
    assert all(c.samples == 51 for c in report.certificates)


def test_user_asserted_windows():
    report = check_windows(pendulum(steps=32), PENDULUM_ALPHAS, method="user_asserted")
    assert report.passed
    assert not report.proof
    assert {c.condition for c in report.certificates} == {"UserAsserted"}


def test_auto_falls_back_to_near_constant():
    pb = cubic_example(lambda x: 0.5 * np.asarray(x))
    assert check_windows(pb, [-10.0, 10.0], method="auto").method == "near_constant"
    assert check_windows(hybrid_example(), [-10.0, 10.0], method="auto").method == "monotone"


def test_unknown_method_is_rejected():
    with pytest.raises(ConfigurationError, match="unknown check method"):
        check_windows(pendulum(steps=32), PENDULUM_ALPHAS, method="interval")


def test_alphas_from_zeros():
    assert alphas_from_zeros([3 * math.pi, 0.0, math.pi, 2 * math.pi]) == pytest.approx(
        [0.5 * math.pi, 1.5 * math.pi, 2.5 * math.pi]
    )
    with pytest.raises(ConfigurationError):
        alphas_from_zeros([0.0, 1.0])


@pytest.mark.parametrize(
    "h, orientation",
    [(lambda x: 2.0 * x + 1.0, "nondecreasing"), (lambda x: 0.5 - 3.0 * x, "nonincreasing")],
)
def test_lemma_sign_for_affine_friction(any_mesh, h, orientation):
    report = check_monotone_integral_lemma(h, any_mesh, trials=100, orientation=orientation, seed=7)
    assert report.passed, report.offending_trial
    assert len(report.values) == 100


def test_lemma_sign_for_cubic_friction_on_discrete_time_scale():
    mesh = Mesh.build(discrete_timescale())
    assert check_monotone_integral_lemma(lambda x: x**3, mesh, orientation="nondecreasing").passed
    assert check_monotone_integral_lemma(lambda x: -(x**3), mesh, orientation="nonincreasing").passed


def test_lemma_integral_vanishes_on_the_real_line():
    mesh = Mesh.build(TimeScale.continuous(2.0), 2.0 / 128)
    report = check_monotone_integral_lemma(lambda x: x, mesh, trials=100)
    assert report.passed
    assert max(abs(v) for v in report.values) < 1e-9


def test_lemma_on_example_function(jump_x):
    assert delta_integral(jump_x * delta_derivative(jump_x)) == pytest.approx(-2.5, abs=1e-12)
    assert check_monotone_integral_lemma(lambda x: x, jump_x.mesh).passed


def test_lemma_catches_non_monotone_friction():
    mesh = Mesh.build(jump_timescale(), 0.25)
    report = check_monotone_integral_lemma(np.cos, mesh, trials=200, amplitude=3.0)
    assert not report.passed
    assert report.offending_trial is not None


def test_constant_friction_lemma_integral_is_zero():
    mesh = Mesh.build(hybrid_timescale(), 1 / 32)
    report = check_monotone_integral_lemma(lambda x: np.full(np.shape(x), 2.0), mesh, trials=20)
    assert report.passed
    assert max(abs(v) for v in report.values) < 1e-12


def test_lemma_rejects_unknown_orientation(jump_mesh):
    with pytest.raises(ConfigurationError):
        check_monotone_integral_lemma(lambda x: x, jump_mesh, orientation="increasing")


def test_lemma_report_joins_check_report():
    pb = pendulum(steps=32)
    report = check_windows(pb, PENDULUM_ALPHAS, method="near_constant")
    report.lemma = check_monotone_integral_lemma(np.cos, Mesh.build(jump_timescale(), 0.25), trials=200, amplitude=3.0)
    assert not report.passed
    assert report.to_dict()["lemma"]["passed"] is False


@pytest.mark.parametrize(
    "h, orientation",
    [
        (np.arctan, "nondecreasing"),
        (lambda x: -np.tanh(x), "nonincreasing"),
        (lambda x: np.asarray(x) ** 3, "nondecreasing"),
    ],
)
def test_lemma_sign_for_nonlinear_friction(any_mesh, h, orientation):
    report = check_monotone_integral_lemma(h, any_mesh, trials=100, orientation=orientation, seed=0)
    assert report.passed, report.offending_trial


@pytest.mark.parametrize("h", [np.arctan, lambda x: -np.tanh(x), lambda x: np.asarray(x) ** 3])
def test_nonlinear_friction_work_vanishes_on_the_real_line(h):
    mesh = Mesh.build(TimeScale.continuous(2.0), 2.0 / 128)
    report = check_monotone_integral_lemma(h, mesh, trials=50, seed=1)
    assert max(abs(v) for v in report.values) < 1e-9


def test_friction_work_is_exact_for_linear_segments():
    mesh = Mesh.build(TimeScale.continuous(1.0), 0.5)
    x = GridFunction.from_values(mesh, [0.0, 1.0])
    work, scale = friction_work(lambda u: np.asarray(u) ** 2, x)
    # up 0 -> 1 then back down: 1/3 - 1/3
    assert work == pytest.approx(0.0, abs=1e-15)
    assert scale == pytest.approx(2.0 / 3.0, rel=1e-14)

    jump = GridFunction.from_values(Mesh.build(jump_timescale(), 0.5), [0.0, 0.5, 1.0, 2.0])
    work, _ = friction_work(np.arctan, jump)
    expected = np.arctan(1.0) * 1.0 + np.arctan(2.0) * (-2.0) + (
        1.0 * math.atan(1.0) - 0.5 * math.log(2.0)
    )
    assert work == pytest.approx(expected, abs=1e-14)


def test_slowly_oscillating_restoring_force_gives_one_solution_per_window():
    period = 0.9 * math.pi
    omega = 2 * math.pi / period
    pb = Problem.build(
        TimeScale.continuous(period),
        relativistic(1.0),
        lambda x: np.full(np.shape(x), 0.1),
        lambda x: np.sin(np.asarray(x) / 2.0),
        lambda t: 0.1 * np.cos(omega * t),
        dt_max=period / 128,
    )
    zeros = [2 * math.pi * k for k in range(4)]
    alphas = alphas_from_zeros(zeros)
    report = check_windows(pb, alphas, method="near_constant")
    assert report.passed
    outcomes = multi_solve(pb, alphas)
    assert len(outcomes) == len(alphas) - 1
    assert all(isinstance(o, SolutionRecord) for o in outcomes)
    starts = [o.x0 for o in outcomes]
    assert len(set(np.round(starts, 6))) == len(starts)
    for x0, (lo, hi) in zip(starts, zip(alphas, alphas[1:])):
        assert lo < x0 < hi
