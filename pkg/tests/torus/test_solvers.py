"""
Test the descent and Newton-Krylov solvers.
"""

# pylint: disable=attribute-defined-outside-init,protected-access

import itertools
import math
from unittest.mock import patch

import numpy as np
import pytest

from src.torus.functional import j_functional
from src.torus import solvers
from src.torus.solvers import project_to_sphere, solve_min, solve_newton
from src.torus.torus_field import TorusField
from src.utils.errors import (
    InvalidParameterError,
    KrylovBreakdownError,
    LineSearchStallError,
    MaxIterationsError,
    NonPositiveSolutionError,
)

P, BETA = 1.5, 2.0 * math.pi
COSINE_WEIGHT = {"kind": "cosine", "mean": 1.0, "amplitude": 0.3, "mode": 1}


class TestConstantWeight:
    """Solves with h = 1 on the unit torus."""

    def setup_method(self):
        """Constant starting field on a 32^2 grid."""
        self.init = TorusField.constant(1.0, 32, value=1.0)

    def test_descent_converges(self):
        """solve_min reaches the 1e-8 residual with a positive solution."""
        report = solve_min(P, BETA, self.init)
        assert report.residual_l2 < 1e-8
        assert report.positivity
        assert report.u_min > 0.0
        assert report.method == "min"

    def test_newton_polish(self):
        """Newton brings the residual below 1e-12 and beta_of back to beta."""
        coarse = solve_min(P, BETA, self.init)
        report = solve_newton(P, BETA, coarse.solution)
        assert report.residual_l2 < 1e-12
        assert abs(report.beta_check - BETA) <= 1e-10 * BETA
        assert 2.0 * report.lam <= 1.0 + 1e-9
        assert report.residual_history[-1] == report.residual_l2

    def test_noise_does_not_change_the_solution(self):
        """A perturbed start converges back to the same solution."""
        reference = solve_newton(P, BETA, solve_min(P, BETA, self.init).solution)
        rng = np.random.default_rng(11)
        noisy = self.init.with_values(1.0 + 0.01 * rng.standard_normal((32, 32)))
        report = solve_newton(P, BETA, solve_min(P, BETA, noisy).solution)
        difference = report.solution.values - reference.solution.values
        assert math.sqrt(report.solution.integrate(difference * difference)) < 1e-6

    def test_amplitude_vanishes_with_beta(self):
        """Solutions shrink to zero as beta goes to zero."""
        amplitudes = [solve_min(P, beta, self.init).u_max for beta in (0.1, 0.01)]
        assert amplitudes[1] < amplitudes[0]
        assert amplitudes[1] < 0.2

    def test_critical_exponent_on_sphere(self):
        """At p = 2 the descent stays on ||u||_h^2 = beta."""
        report = solve_min(2.0, BETA, self.init)
        assert report.residual_l2 < 1e-8
        assert report.solution.norm_h_squared() == pytest.approx(BETA, rel=1e-10)

    def test_newton_contracts_quadratically(self):
        """Residual ratios shrink step after step until they fall below 1e-2."""
        coarse = solve_min(P, BETA, self.init)
        solution = solve_newton(P, BETA, coarse.solution).solution
        x = np.arange(32) / 32.0
        bump = np.cos(2.0 * np.pi * x)[:, None] * np.cos(2.0 * np.pi * x)[None, :]
        start = solution.with_values(solution.values * (1.0 + 0.1 * bump))
        history = solve_newton(P, BETA, start).residual_history
        ratios = [
            later / earlier
            for earlier, later in zip(history, history[1:])
            if earlier > 1e-9
        ]
        assert len(ratios) >= 2
        assert all(later < earlier for earlier, later in zip(ratios, ratios[1:]))
        assert ratios[-1] < 1e-2

    def test_record_fields(self):
        """Report rows carry the solve metadata."""
        record = solve_min(P, BETA, self.init).to_record()
        expected = {"p", "beta", "lambda", "iterations", "residual_l2", "u_max"}
        assert set(record) >= expected | {"beta_check", "multiplier_bound_ok"}
        assert record["multiplier_bound_ok"] is True


def test_minimizer_beats_constant_of_equal_norm():
    """With a varying weight the minimizer beats the constant of equal norm."""
    init = TorusField.constant(1.0, 16, value=1.0, h=COSINE_WEIGHT)
    report = solve_min(P, BETA, init)
    constant = project_to_sphere(init, report.solution.norm_h_squared())
    lowest = j_functional(report.solution, P, BETA)
    assert lowest <= j_functional(constant, P, BETA) + 1e-12
    assert report.residual_l2 < 1e-8


def test_descent_needs_beta_below_four_pi():
    """Minimization is refused at beta >= 4 pi."""
    with pytest.raises(InvalidParameterError):
        solve_min(P, 4.0 * math.pi, TorusField.constant(1.0, 8, value=1.0))


def test_descent_iteration_cap():
    """One iteration cannot reach the tolerance."""
    with pytest.raises(MaxIterationsError):
        solve_min(P, BETA, TorusField.constant(1.0, 8, value=1.0), max_iter=1)


def test_line_search_stall():
    """Backtracking gives up when J never decreases."""
    counter = itertools.count()
    def rising(*_):
        return float(next(counter))

    with patch("src.torus.solvers.j_functional", side_effect=rising):
        with pytest.raises(LineSearchStallError):
            solve_min(P, BETA, TorusField.constant(1.0, 8, value=1.0))


def test_newton_iteration_cap():
    """Zero Newton steps from an unconverged start hit the cap."""
    with pytest.raises(MaxIterationsError):
        solve_newton(P, BETA, TorusField.constant(1.0, 8, value=1.0), max_iter=0)


def test_newton_krylov_breakdown():
    """A negative GMRES status is reported."""
    init = TorusField.constant(1.0, 8, value=1.0)
    with patch("src.torus.solvers.gmres", return_value=(np.zeros(64), -1)):
        with pytest.raises(KrylovBreakdownError):
            solve_newton(P, BETA, init)


def test_non_positive_solution_rejected():
    """A converged field with a non-positive sample is refused."""
    values = np.ones((8, 8))
    values[0, 0] = -0.1
    init = TorusField.constant(1.0, 8).with_values(values)
    with patch("src.torus.solvers.residual_l2", return_value=0.0):
        with pytest.raises(NonPositiveSolutionError):
            solve_newton(P, BETA, init)


class TestCosineWeight:
    """Solves with h = 1 + 0.3 cos(2 pi x) cos(2 pi y), inverted by CG."""

    def setup_method(self):
        """Cosine weight on a 16^2 grid."""
        self.init = TorusField.constant(1.0, 16, value=1.0, h=COSINE_WEIGHT)

    def test_descent_decreases_j(self):
        """J never increases along the Armijo descent."""
        report = solve_min(P, BETA, self.init)
        energies = report.energy_history
        assert len(energies) == report.iterations + 1
        assert all(later <= earlier for earlier, later in zip(energies, energies[1:]))
        assert energies[-1] < energies[0]

    def test_grid_refinement_is_stable(self):
        """Doubling the grid leaves the shared samples and lambda unchanged."""
        coarse = solve_newton(P, BETA, solve_min(P, BETA, self.init).solution)
        fine_init = TorusField.constant(1.0, 32, value=1.0, h=COSINE_WEIGHT)
        fine = solve_newton(P, BETA, solve_min(P, BETA, fine_init).solution)
        shared = fine.solution.values[::2, ::2]
        assert np.max(np.abs(shared - coarse.solution.values)) < 1e-5 * fine.u_max
        assert fine.lam == pytest.approx(coarse.lam, rel=1e-6)
        assert fine.u_max - fine.u_min > 1e-3

    def test_multiplier_bound(self):
        """Positive solutions satisfy 2 lam <= max h."""
        report = solve_newton(P, BETA, solve_min(P, BETA, self.init).solution)
        assert report.multiplier_bound_ok
        assert 2.0 * report.lam <= float(np.max(report.solution.h_values)) + 1e-9


def test_multiplier_bound_breach_is_flagged():
    """A multiplier above max h / 2 is reported instead of only logged."""
    field = TorusField.constant(1.0, 8, value=1.0)
    with patch("src.torus.solvers.beta_of", return_value=BETA):
        report = solvers._finish(field, P, BETA, 0.75, 3, [1e-13], "newton")
    assert report.multiplier_bound_ok is False
    assert report.to_record()["multiplier_bound_ok"] is False
    assert report.energy_history == ()
