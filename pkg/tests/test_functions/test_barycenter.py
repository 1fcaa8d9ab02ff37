"""
Test barycenter test functions, their shifts and their radial reference energies.
"""

# pylint: disable=attribute-defined-outside-init

import math

import numpy as np
import pytest

from src.test_functions.barycenter import (
    Barycenter,
    TestFunctionParams,
    build_phi,
    log_bubble_mass,
    lowsublevel_slope,
    peak_scale,
    reference_energies,
    support_radius,
    tau_solve,
)
from src.test_functions.phi_energies import mt_deficit, phi_energies
from src.torus.torus_field import TorusField, torus_distance
from src.utils.errors import (
    InvalidParameterError,
    SupportOverlapError,
    UnderResolvedError,
)


class TestBarycenter:
    """Validation of weighted point configurations."""

    def test_build_wraps_points(self):
        """Points outside [0, L) are wrapped into the fundamental domain."""
        sigma = Barycenter.build([(-0.25, 1.5)], [1.0], 1.0)
        assert sigma.points == ((0.75, 0.5),)
        assert sigma.k == 1

    def test_weights_must_sum_to_one(self):
        """Weights off the simplex are refused."""
        with pytest.raises(InvalidParameterError):
            Barycenter.build([(0.1, 0.1), (0.6, 0.6)], [0.5, 0.6])

    def test_negative_weight(self):
        """Negative weights are refused."""
        with pytest.raises(InvalidParameterError):
            Barycenter.build([(0.1, 0.1), (0.6, 0.6)], [-0.5, 1.5])

    def test_misaligned_inputs(self):
        """Points and weights must pair up."""
        with pytest.raises(InvalidParameterError):
            Barycenter.build([(0.1, 0.1)], [0.5, 0.5])

    def test_point_outside_domain(self):
        """The constructor itself does not wrap."""
        with pytest.raises(InvalidParameterError):
            Barycenter(((1.2, 0.1),), (1.0,), 1.0)

    def test_separation_across_the_seam(self):
        """Separation uses the geodesic distance."""
        sigma = Barycenter.build([(0.05, 0.5), (0.95, 0.5)], [0.5, 0.5])
        assert sigma.min_separation() == pytest.approx(0.1)

    def test_single_point_separation(self):
        """One point has infinite separation."""
        assert Barycenter.build([(0.3, 0.3)], [1.0]).min_separation() == math.inf


def test_support_radius_close_to_inverse_gamma():
    """delta_gamma tends to 1 / gamma."""
    assert support_radius(10.0, 1.5) == pytest.approx(0.1, rel=1e-12)
    assert support_radius(2.0, 1.5) < 0.5


class TestTauSolve:
    """Height shifts matching prescribed mass fractions."""

    def test_endpoints(self):
        """t = 1 needs no shift and t = 0 removes the whole bubble."""
        assert tau_solve(1.0, 4.0, 1.5) == 0.0
        assert tau_solve(0.0, 4.0, 1.5) == peak_scale(1.5) * 4.0

    def test_mass_ratio_matches_fraction(self):
        """mass(tau(t)) / mass(0) = t."""
        gamma, p = 4.0, 1.5
        reference = log_bubble_mass(0.0, gamma, p)
        for t in (0.1, 0.3, 0.7):
            tau = tau_solve(t, gamma, p)
            ratio = math.exp(log_bubble_mass(tau, gamma, p) - reference)
            assert ratio == pytest.approx(t, rel=1e-8)

    def test_decreasing_in_fraction(self):
        """A smaller fraction needs a larger shift."""
        taus = [tau_solve(t, 4.0, 1.5) for t in (0.2, 0.5, 0.8)]
        assert taus[0] > taus[1] > taus[2] > 0.0

    def test_decreasing_in_gamma(self):
        """Taller bubbles reach the same fraction with a smaller shift."""
        taus = [tau_solve(0.5, gamma, 1.5) for gamma in (4.0, 6.0, 8.0)]
        assert taus[0] > taus[1] > taus[2]

    def test_fraction_out_of_range(self):
        """t outside [0, 1] is refused."""
        with pytest.raises(InvalidParameterError):
            tau_solve(1.5, 4.0, 1.5)

    def test_params_reject_shift_above_peak(self):
        """Shifts above the peak height are refused."""
        with pytest.raises(InvalidParameterError):
            TestFunctionParams(3.0, 1.5, 0.0, 0.3, (10.0,))


class TestBuildPhi:
    """Sampling of barycenter test functions."""

    def setup_method(self):
        """A single bubble at a grid node of a resolved grid."""
        self.gamma, self.p = 3.0, 1.5
        self.grid = TorusField.constant(2.0, 256)
        self.sigma = Barycenter.build([(1.0, 1.0)], [1.0], 2.0)
        self.phi = build_phi(self.sigma, self.gamma, self.p, self.grid)

    def test_peak_value(self):
        """At the centre phi equals (2/p)^(1/p) gamma."""
        peak = peak_scale(self.p) * self.gamma
        assert self.phi.values[128, 128] == pytest.approx(peak, rel=1e-12)
        assert np.max(self.phi.values) == self.phi.values[128, 128]

    def test_vanishes_outside_support(self):
        """phi = 0 beyond delta_gamma."""
        x, y = self.phi.coordinates()
        distance = torus_distance(np.stack((x, y), axis=-1), np.array([1.0, 1.0]), 2.0)
        outside = distance > 1.01 * support_radius(self.gamma, self.p)
        assert np.all(self.phi.values[outside] == 0.0)
        assert np.all(self.phi.values >= 0.0)

    def test_translation_equivariance(self):
        """Moving the point by whole cells rolls the samples."""
        shift = 40
        offset = shift * self.grid.spacing
        moved = Barycenter.build([(1.0 + offset, 1.0 - offset)], [1.0], 2.0)
        phi_moved = build_phi(moved, self.gamma, self.p, self.grid)
        rolled = np.roll(self.phi.values, (shift, -shift), axis=(0, 1))
        assert np.allclose(phi_moved.values, rolled, atol=1e-10)

    def test_overlapping_supports(self):
        """Points closer than 2 delta are refused."""
        sigma = Barycenter.build([(0.75, 1.0), (1.25, 1.0)], [0.5, 0.5], 2.0)
        with pytest.raises(SupportOverlapError):
            build_phi(sigma, self.gamma, self.p, self.grid)

    def test_support_above_quarter_box(self):
        """delta >= L/4 is refused."""
        grid = TorusField.constant(1.0, 256)
        sigma = Barycenter.build([(0.5, 0.5)], [1.0], 1.0)
        with pytest.raises(SupportOverlapError):
            build_phi(sigma, 2.0, self.p, grid)

    def test_under_resolved(self):
        """A support narrower than four cells is refused."""
        grid = TorusField.constant(1.0, 8)
        sigma = Barycenter.build([(0.5, 0.5)], [1.0], 1.0)
        with pytest.raises(UnderResolvedError):
            build_phi(sigma, 5.0, self.p, grid)

    def test_box_mismatch(self):
        """The barycenter and the grid must share the torus."""
        sigma = Barycenter.build([(0.5, 0.5)], [1.0], 1.0)
        with pytest.raises(InvalidParameterError):
            build_phi(sigma, self.gamma, self.p, self.grid)


class TestGridAgainstReference:
    """Grid energies of a two point test function against the radial values."""

    def setup_method(self):
        """Two bubbles of unequal weight on a fine grid."""
        self.gamma, self.p = 3.0, 1.5
        self.grid = TorusField.constant(2.0, 1024)
        self.sigma = Barycenter.build([(0.5, 0.5), (1.5, 1.5)], [0.3, 0.7], 2.0)
        self.params = TestFunctionParams.for_barycenter(self.sigma, self.gamma, self.p)
        self.phi = build_phi(
            self.sigma, self.gamma, self.p, self.grid, params=self.params
        )

    def test_energies_match(self):
        """Dirichlet, L^2 and log mass agree with the radial integrals."""
        grid_energies = phi_energies(self.phi, self.p, 9.0 * math.pi)
        reference = reference_energies(self.gamma, self.p, self.params.taus)
        assert grid_energies.dirichlet == pytest.approx(reference.dirichlet, rel=0.05)
        assert grid_energies.l2h == pytest.approx(reference.l2h, rel=0.05)
        assert grid_energies.logmass == pytest.approx(reference.logmass, abs=0.05)

    def test_mass_fractions(self):
        """Each bubble carries its weight of the exponential mass."""
        mass = np.expm1(self.phi.values**self.p)
        half = self.grid.n // 2
        first = mass[:half, :half].sum() / mass.sum()
        second = mass[half:, half:].sum() / mass.sum()
        assert first == pytest.approx(0.3, abs=0.02)
        assert second == pytest.approx(0.7, abs=0.02)


@pytest.mark.parametrize("k", [1, 2])
def test_energy_slope_at_large_gamma(k):
    """J(phi_gamma) / gamma^p approaches (2-p)/p [(4 pi k / beta)^(p/(2-p)) - 1]."""
    gamma, p = 200.0, 1.5
    beta = 4.0 * math.pi * k + math.pi
    taus = [tau_solve(1.0 / k, gamma, p)] * k
    energies = reference_energies(gamma, p, taus)
    slope = energies.functional(p, beta) / gamma**p
    assert slope == pytest.approx(lowsublevel_slope(p, beta, k), rel=0.1)


def test_slope_negative_above_threshold():
    """The slope is negative exactly when beta > 4 pi k."""
    assert lowsublevel_slope(1.5, 5.0 * math.pi, 1) < 0.0
    assert lowsublevel_slope(1.5, 3.0 * math.pi, 1) > 0.0
    assert lowsublevel_slope(1.5, 8.0 * math.pi, 2) == pytest.approx(0.0, abs=1e-15)


def test_moser_trudinger_deficit_bounded():
    """The subcritical Moser-Trudinger deficit stays bounded above as gamma grows."""
    p = 1.5
    deficits = []
    for gamma in (50.0, 100.0, 200.0):
        energies = reference_energies(gamma, p, [0.0])
        deficits.append(
            mt_deficit(energies.dirichlet, energies.l2h, energies.logmass, p)
        )
    assert max(deficits) < 10.0
    assert deficits[-1] <= deficits[0] + 1.0
