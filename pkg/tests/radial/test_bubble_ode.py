"""
Test the radial bubble ODE module.
"""

# pylint: disable=attribute-defined-outside-init

import math

import numpy as np
import pytest

from src.radial.bubble_ode import (
    BubbleParams,
    lambda_of,
    log_expm1,
    mu_of,
    solve_bubble,
    t_gamma,
    w_gamma_extract,
)
from src.radial.bubble_energy import energy_scale
from src.utils.errors import InvalidParameterError


def test_t_gamma_values():
    """t vanishes at the centre and equals ln 2 at r = mu."""
    assert t_gamma(0.0, 0.3) == 0.0
    assert t_gamma(0.3, 0.3) == pytest.approx(math.log(2.0), rel=1e-15)


def test_t_gamma_does_not_overflow():
    """Huge radii fall back to 2 ln(r / mu)."""
    value = t_gamma(1e200, 1.0)
    assert math.isfinite(value)
    assert value == pytest.approx(2.0 * math.log(1e200), rel=1e-14)


def test_lambda_mu_round_trip():
    """mu_of inverts lambda_of."""
    for gamma, p in [(4.0, 1.0), (6.0, 1.5), (8.0, 2.0)]:
        lam, log_lam = lambda_of(gamma, p, 0.01)
        assert mu_of(gamma, p, lam) == pytest.approx(0.01, rel=1e-12)
        assert mu_of(gamma, p, log_lambda=log_lam) == pytest.approx(0.01, rel=1e-12)


def test_lambda_underflow_keeps_log():
    """For gamma^p in the thousands lam underflows but its log stays exact."""
    lam, log_lam = lambda_of(40.0, 2.0, 1e-3)
    assert lam == 0.0
    assert math.isfinite(log_lam)
    assert mu_of(40.0, 2.0, log_lambda=log_lam) == pytest.approx(1e-3, rel=1e-12)


def test_log_expm1_branches_agree():
    """The large argument branch matches the direct formula near the switch."""
    for y in (30.0 + 1e-9, 1e-3):
        assert log_expm1(y) == pytest.approx(math.log(math.expm1(y)), rel=1e-14)


class TestBubbleParams:
    """Validation of the scaling data."""

    def test_from_scale_satisfies_identity(self):
        """The stored log multiplier obeys the scaling identity."""
        params = BubbleParams.from_scale(8.0, 1.5, 1e-3)
        residual = (
            params.log_lambda
            + 2.0 * math.log(params.p)
            + 2.0 * (params.p - 1.0) * math.log(params.gamma)
            + 2.0 * math.log(params.mu)
            + params.gamma**params.p
            - math.log(8.0)
        )
        assert abs(residual) <= 1e-12 * params.gamma**params.p

    def test_inconsistent_lambda_rejected(self):
        """A multiplier off the identity is refused."""
        params = BubbleParams.from_scale(6.0, 2.0, 1e-2)
        with pytest.raises(InvalidParameterError):
            BubbleParams(
                6.0, 2.0, 1e-2, params.lam, 1.0, params.rbar, params.log_lambda + 1e-3
            )

    def test_rbar_must_exceed_mu(self):
        """rbar <= mu is refused."""
        with pytest.raises(InvalidParameterError):
            BubbleParams.from_scale(6.0, 2.0, 1e-2, rbar=1e-2)

    def test_rbar_beyond_ceiling_rejected(self):
        """t(rbar) above p gamma^p / 2 is refused."""
        params = BubbleParams.from_scale(6.0, 2.0, 1e-2)
        with pytest.raises(InvalidParameterError):
            BubbleParams.from_scale(6.0, 2.0, 1e-2, rbar=params.rbar * 10.0)

    def test_invalid_exponent(self):
        """p outside [1, 2] is refused."""
        with pytest.raises(InvalidParameterError):
            BubbleParams.from_scale(6.0, 2.5, 1e-2)


class TestSolveBubble:
    """Properties of a solved profile."""

    def setup_method(self):
        """Solve one bubble shared by the tests."""
        gamma, p = 8.0, 2.0
        mu = math.exp(energy_scale(gamma, p))
        self.params = BubbleParams.from_scale(gamma, p, mu)
        self.profile = solve_bubble(self.params, 100.0)

    def test_initial_values(self):
        """z(0) = 0, z'(0) = 0 and B(0) = gamma."""
        assert self.profile.s_grid[0] == 0.0
        assert self.profile.z_values[0] == 0.0
        assert self.profile.q_values[0] == 0.0
        assert self.profile.b_values[0] == self.params.gamma

    def test_profile_bounds(self):
        """0 < B <= gamma and z finite on the whole grid."""
        assert np.all(np.isfinite(self.profile.z_values))
        assert np.all(self.profile.b_values <= self.params.gamma)
        assert np.all(self.profile.b_values > 0.0)

    def test_grid_is_increasing(self):
        """The integrator grid is strictly increasing."""
        assert np.all(np.diff(self.profile.s_grid) > 0.0)
        assert self.profile.s_grid[-1] == pytest.approx(100.0, rel=1e-12)

    def test_w_gamma_extract(self):
        """The remainder w vanishes at the centre and grows at most like t."""
        extract = w_gamma_extract(self.profile)
        assert extract.w_values[0] == 0.0
        assert np.all(np.isfinite(extract.w_values))
        assert extract.sup_ratio < 10.0

    def test_s_max_beyond_rbar_rejected(self):
        """s_max mu may not exceed rbar."""
        with pytest.raises(InvalidParameterError):
            solve_bubble(self.params, 10.0 * self.params.rbar / self.params.mu)


def _liouville_gap(gamma, p):
    params = BubbleParams.from_scale(gamma, p, 1e-6)
    profile = solve_bubble(params, 10.0)
    return float(np.max(np.abs(profile.z_values - profile.t_values)))


def test_profile_converges_at_rate_gamma_minus_p():
    """Doubling gamma^p halves sup_{s <= 10} |z - ln(1 + s^2)|."""
    ratio = _liouville_gap(8.0, 2.0) / _liouville_gap(math.sqrt(128.0), 2.0)
    assert 1.5 < ratio < 2.5, f"gap ratio {ratio:.4f} is not close to 2"


@pytest.mark.parametrize("h0", [0.5, 2.0])
def test_potential_enters_through_kappa(h0):
    """kappa is linear in h0 and the centre curvature follows the closed form."""
    gamma, p, mu = 2.0, 1.5, 0.5
    base = BubbleParams.from_scale(gamma, p, mu)
    params = BubbleParams.from_scale(gamma, p, mu, h0=h0)
    assert params.kappa == pytest.approx(h0 * base.kappa, rel=1e-12)
    pull = params.lam * p * gamma ** (p - 1.0) * math.exp(gamma**p)
    assert params.c2 == pytest.approx((h0 * gamma - pull) / 4.0, rel=1e-12)


def test_log_profile_gap_at_centre():
    """gap gamma^(p-1) = w + (2/p)(ln 8 - 2 ln p), so w(0) = 0 fixes the centre."""
    for gamma, p in [(8.0, 2.0), (6.0, 1.5)]:
        params = BubbleParams.from_scale(gamma, p, 1e-6)
        extract = w_gamma_extract(solve_bubble(params, 10.0))
        centre = (2.0 / p) * (math.log(8.0) - 2.0 * math.log(p))
        scaled = extract.log_profile_gap[0] * gamma ** (p - 1.0)
        assert scaled == pytest.approx(centre, rel=1e-9)
        shifted = extract.log_profile_gap * gamma ** (p - 1.0)
        assert np.allclose(shifted, extract.w_values + centre, rtol=0.0, atol=1e-8)
        assert extract.log_profile_gap_scaled >= centre


def _w_sup_ratio(gamma, p):
    params = BubbleParams.from_scale(gamma, p, 1e-6)
    return w_gamma_extract(solve_bubble(params, 10.0)).sup_ratio


def test_w_gamma_decays_like_gamma_minus_p():
    """Doubling gamma divides sup |w| / (t + 1) by about 2^p."""
    p = 2.0
    ratio = _w_sup_ratio(12.0, p) / _w_sup_ratio(6.0, p)
    assert ratio == pytest.approx(2.0**-p, rel=0.25)
