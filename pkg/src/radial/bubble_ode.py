"""
Radial bubble ODE integrated in overflow-safe variables.

The bubble B solves -(B'' + B'/r) + h0 B = lam p B^(p-1) exp(B^p) with B(0) = gamma.
It is integrated through the deficit z(s) = (p/2) gamma^(p-1) (gamma - B(mu s))
in the log variable tau = ln s, so that exp(gamma^p) and lam never appear on
their own: only exp(B^p - gamma^p) <= 1 is evaluated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from src.utils.errors import (
    InvalidParameterError,
    NonPositiveBubbleError,
    StepFailureError,
)
from src.utils.utils import check_exponent, check_positive

logger = logging.getLogger(__name__)

LN8 = math.log(8.0)
SERIES_START = 1e-4


def t_gamma(r, mu):
    """
    Liouville variable t = ln(1 + r^2 / mu^2).
    Args:
        r (float or np.ndarray): Radius, r >= 0.
        mu (float): Concentration scale, mu > 0.
    Returns:
        float or np.ndarray: ln(1 + (r/mu)^2) via log1p.
    """
    ratio = np.asarray(r, dtype=float) / mu
    # (r/mu)^2 overflows past 1e154; 2 ln(r/mu) is exact there
    big = ratio > 1e150
    safe = np.where(big, 1.0, ratio)
    far = 2.0 * np.log(np.where(big, ratio, 1.0))
    value = np.where(big, far, np.log1p(safe * safe))
    return float(value) if value.ndim == 0 else value


def log_lambda_of(gamma, p, mu):
    """
    Log of the multiplier tied to (gamma, p, mu) by
    lam p^2 gamma^(2(p-1)) mu^2 exp(gamma^p) = 8.
    """
    return (
        LN8
        - 2.0 * math.log(p)
        - 2.0 * (p - 1.0) * math.log(gamma)
        - 2.0 * math.log(mu)
        - gamma**p
    )


def lambda_of(gamma, p, mu):
    """
    Multiplier lam for a bubble of height gamma at scale mu.
    Args:
        gamma (float): Peak height, > 0.
        p (float): Exponent in [1, 2].
        mu (float): Concentration scale, > 0.
    Returns:
        tuple: (lam, log_lam); lam may underflow to 0.0, log_lam never does.
    """
    check_positive(gamma=gamma, mu=mu)
    check_exponent(p, low=1.0)
    log_lam = log_lambda_of(gamma, p, mu)
    return math.exp(log_lam), log_lam


def mu_of(gamma, p, lam=None, log_lambda=None):
    """
    Concentration scale of a bubble of height gamma with multiplier lam.
    Args:
        gamma (float): Peak height, > 0.
        p (float): Exponent in [1, 2].
        lam (float): Multiplier, > 0. Ignored when log_lambda is given.
        log_lambda (float): Log of the multiplier.
    Returns:
        float: mu = sqrt(8 / (lam p^2 gamma^(2(p-1)) exp(gamma^p))).
    """
    if log_lambda is None:
        check_positive(lam=lam)
        log_lambda = math.log(lam)
    check_positive(gamma=gamma)
    check_exponent(p, low=1.0)
    log_gamma_term = 2.0 * (p - 1.0) * math.log(gamma)
    return math.exp(
        0.5 * (LN8 - log_lambda - 2.0 * math.log(p) - log_gamma_term - gamma**p)
    )


@dataclass(frozen=True)
class BubbleParams:
    """
    Scaling data of a radial bubble.
    Attributes:
        gamma (float): Peak height.
        p (float): Exponent in [1, 2].
        mu (float): Concentration scale.
        lam (float): Multiplier (may underflow; use log_lambda).
        h0 (float): Constant potential.
        rbar (float): Analysis radius.
        log_lambda (float): Log of the multiplier.
    """

    gamma: float
    p: float
    mu: float
    lam: float
    h0: float
    rbar: float
    log_lambda: float

    def __post_init__(self):
        check_positive(gamma=self.gamma, mu=self.mu, h0=self.h0, rbar=self.rbar)
        check_exponent(self.p, low=1.0)
        drift = abs(
            self.log_lambda
            + 2.0 * math.log(self.p)
            + 2.0 * (self.p - 1.0) * math.log(self.gamma)
            + 2.0 * math.log(self.mu)
            + self.gamma**self.p
            - LN8
        )
        if drift > 1e-12 * max(1.0, self.gamma**self.p):
            raise InvalidParameterError(
                f"log_lambda violates the scaling identity by {drift:.3e}"
            )
        if not self.mu < self.rbar:
            raise InvalidParameterError("rbar must exceed mu")
        if t_gamma(self.rbar, self.mu) > self.t_ceiling * (1.0 + 1e-12):
            raise InvalidParameterError(
                "rbar too large: t(rbar) must not exceed p gamma^p / 2"
            )

    @classmethod
    def from_scale(cls, gamma, p, mu, h0=1.0, rbar=None):
        """
        Build parameters from (gamma, p, mu), deriving lam in log domain.
        Args:
            gamma (float): Peak height.
            p (float): Exponent.
            mu (float): Concentration scale.
            h0 (float): Constant potential.
            rbar (float): Analysis radius; the largest admissible one when omitted.
        Returns:
            BubbleParams: Validated parameters.
        """
        lam, log_lam = lambda_of(gamma, p, mu)
        if rbar is None:
            rbar = mu * math.exp(0.5 * log_expm1(0.5 * p * gamma**p))
        return cls(
            gamma=gamma, p=p, mu=mu, lam=lam, h0=h0, rbar=rbar, log_lambda=log_lam
        )

    @property
    def t_ceiling(self):
        """Largest admissible t on [0, rbar]: p gamma^p / 2."""
        return 0.5 * self.p * self.gamma**self.p

    @property
    def kappa(self):
        """Rescaled potential (p/2) gamma^p mu^2 h0, evaluated in log domain."""
        return math.exp(
            math.log(0.5 * self.p)
            + self.p * math.log(self.gamma)
            + 2.0 * math.log(self.mu)
            + math.log(self.h0)
        )

    @property
    def c2(self):
        """Curvature B''(0)/2 = (h0 gamma - lam p gamma^(p-1) exp(gamma^p)) / 4."""
        scale = self.p * self.gamma ** (self.p - 1.0) * self.mu**2
        return -2.0 * (1.0 - 0.25 * self.kappa) / scale


def log_expm1(y):
    """ln(exp(y) - 1) for y > 0 without overflow."""
    if y > 30.0:
        return y + math.log(-math.expm1(-y))
    return math.log(math.expm1(y))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """
    Solved bubble on a nonuniform grid in s = r / mu.
    Attributes:
        s_grid (np.ndarray): Abscissae, s_grid[0] = 0.
        z_values (np.ndarray): Deficit z(s).
        q_values (np.ndarray): s z'(s).
        b_values (np.ndarray): Reconstructed B(mu s).
        bprime_values (np.ndarray): dB/dr.
        plain_integral (np.ndarray): Running integral of exp(B^p - gamma^p) s ds.
        weighted_integral (np.ndarray): Running integral of
            (B/gamma)^p exp(B^p - gamma^p) s ds.
        params (BubbleParams): Scaling data.
    """

    s_grid: np.ndarray
    z_values: np.ndarray
    q_values: np.ndarray
    b_values: np.ndarray
    bprime_values: np.ndarray
    plain_integral: np.ndarray
    weighted_integral: np.ndarray
    params: BubbleParams

    @property
    def t_values(self):
        """t = ln(1 + s^2) on the grid."""
        return np.log1p(self.s_grid**2)

    @property
    def r_grid(self):
        """Radii in length units."""
        return self.params.mu * self.s_grid


class BubbleSystem:
    """
    Right-hand side and events of the deficit ODE in tau = ln s.

    State: [z, q = dz/dtau, I_plain, I_weighted].
    """

    def __init__(self, params):
        self.params = params
        self.gamma_p = params.gamma**params.p
        self.kappa = params.kappa

    def fraction(self, z):
        """x = 2 z / (p gamma^p); B = gamma (1 - x)."""
        return 2.0 * z / (self.params.p * self.gamma_p)

    def exponent_deficit(self, one_minus_x):
        """B^p - gamma^p = gamma^p expm1(p ln(1 - x))."""
        return self.gamma_p * np.expm1(self.params.p * np.log(one_minus_x))

    def rhs(self, tau, state):
        """Deficit ODE: z'' = s^2 [4 (1-x)^(p-1) e^D - kappa (1-x)]."""
        z, q = state[0], state[1]
        p = self.params.p
        s2 = math.exp(2.0 * tau)
        one_minus_x = max(1.0 - self.fraction(z), 1e-300)
        growth = math.exp(self.exponent_deficit(one_minus_x))
        dq = s2 * (4.0 * one_minus_x ** (p - 1.0) * growth - self.kappa * one_minus_x)
        return [q, dq, s2 * growth, s2 * one_minus_x**p * growth]

    def zero_crossing(self, _tau, state):
        """Vanishes where B = 0."""
        return 1.0 - self.fraction(state[0])

    def neck_slope(self, _tau, state):
        """
        d/dtau of ln(s^2 exp(B^p)); its upward zero marks the neck where the
        mass integrand stops decaying.
        """
        one_minus_x = max(1.0 - self.fraction(state[0]), 1e-300)
        return 2.0 - 2.0 * one_minus_x ** (self.params.p - 1.0) * state[1]

    def initial_state(self, s0=SERIES_START):
        """Two-term series z = a s^2 with a = 1 - kappa / 4."""
        a = 1.0 - 0.25 * self.kappa
        half = 0.5 * s0 * s0
        return [a * s0 * s0, 2.0 * a * s0 * s0, half, half]


def integrate_bubble(
    params,
    tau_end,
    rtol=1e-10,
    atol=1e-14,
    max_step=0.05,
    stop_at_neck=False,
    x_cap=None,
):
    """
    Run the adaptive RK45 integration of the deficit ODE.
    Args:
        params (BubbleParams): Scaling data.
        tau_end (float): ln of the last rescaled radius.
        rtol (float): Relative tolerance.
        atol (float): Absolute tolerance.
        max_step (float): Largest step in tau.
        stop_at_neck (bool): Stop at the first upward zero of the neck slope.
        x_cap (float): Stop where B = gamma (1 - x_cap).
    Returns:
        tuple: (solution, system); solution is scipy's OdeResult.
    Raises:
        NonPositiveBubbleError: If B reaches 0 before tau_end.
        StepFailureError: If the step controller fails.
    """
    system = BubbleSystem(params)
    tau0 = math.log(SERIES_START)
    if tau_end <= tau0:
        raise InvalidParameterError(f"s_max must exceed {SERIES_START}")

    def crossing(tau, state):
        return system.zero_crossing(tau, state)

    def neck(tau, state):
        return system.neck_slope(tau, state)

    def cap(_tau, state):
        return x_cap - system.fraction(state[0])

    crossing.terminal, crossing.direction = True, -1
    neck.terminal, neck.direction = True, 1
    cap.terminal, cap.direction = True, -1
    all_events = [crossing]
    if stop_at_neck:
        all_events.append(neck)
    if x_cap is not None:
        all_events.append(cap)

    solution = solve_ivp(
        system.rhs,
        (tau0, tau_end),
        system.initial_state(),
        method="RK45",
        rtol=rtol,
        atol=atol,
        max_step=max_step,
        events=all_events,
    )
    if solution.status == -1:
        logger.error("Bubble integration failed: %s", solution.message)
        raise StepFailureError(solution.message)
    if solution.t_events[0].size:
        radius = params.mu * math.exp(solution.t_events[0][0])
        logger.warning("Bubble crossed zero at r=%.6e", radius)
        raise NonPositiveBubbleError(radius)
    logger.debug(
        "Bubble gamma=%.4g p=%.4g integrated over %d steps",
        params.gamma,
        params.p,
        solution.t.size,
    )
    return solution, system


def profile_from_solution(params, solution, system):
    """
    Assemble a RadialProfile from an ODE solution, prepending the exact s = 0 values.
    """
    s = np.exp(solution.t)
    z, q, plain, weighted = solution.y
    p, gamma = params.p, params.gamma
    scale = 2.0 / (p * gamma ** (p - 1.0))
    b_values = gamma * (1.0 - system.fraction(z))
    bprime = -scale * q / (s * params.mu)
    return RadialProfile(
        s_grid=np.concatenate(([0.0], s)),
        z_values=np.concatenate(([0.0], z)),
        q_values=np.concatenate(([0.0], q)),
        b_values=np.concatenate(([gamma], b_values)),
        bprime_values=np.concatenate(([0.0], bprime)),
        plain_integral=np.concatenate(([0.0], plain)),
        weighted_integral=np.concatenate(([0.0], weighted)),
        params=params,
    )


def solve_bubble(params, s_max, rtol=1e-10, atol=1e-14, max_step=0.05):
    """
    Solve the bubble ODE on [0, s_max] in the rescaled variable s = r / mu.
    Args:
        params (BubbleParams): Scaling data.
        s_max (float): Last rescaled radius; s_max mu <= rbar.
        rtol (float): Relative tolerance of the RK45 pair.
        atol (float): Absolute tolerance.
        max_step (float): Largest step in tau = ln s.
    Returns:
        RadialProfile: Profile on the step grid of the integrator.
    """
    if s_max * params.mu > params.rbar * (1.0 + 1e-12):
        raise InvalidParameterError("s_max * mu must not exceed rbar")
    solution, system = integrate_bubble(params, math.log(s_max), rtol, atol, max_step)
    profile = profile_from_solution(params, solution, system)
    if not np.all(np.isfinite(profile.z_values)):
        raise StepFailureError("non-finite deficit on the grid")
    if np.any(profile.b_values > params.gamma * (1.0 + 1e-12)):
        logger.warning("Bubble exceeds its peak value gamma=%.6g", params.gamma)
    return profile


@dataclass(frozen=True, eq=False)
class WGammaExtract:
    """
    Remainder w of B = gamma (1 - 2t/(p gamma^p) + w / gamma^p).
    Attributes:
        w_values (np.ndarray): w on the profile grid.
        sup_ratio (float): sup |w| / (t + 1).
        log_profile_gap (np.ndarray): B minus the explicit log profile built from
            lam and mu.
        log_profile_gap_scaled (float): sup of the gap in units of gamma^(1-p).
    """

    w_values: np.ndarray
    sup_ratio: float
    log_profile_gap: np.ndarray
    log_profile_gap_scaled: float


def w_gamma_extract(profile):
    """
    Extract w_gamma = gamma^(p-1)(B - gamma) + (2/p) t from a solved profile.
    Args:
        profile (RadialProfile): Solved bubble.
    Returns:
        WGammaExtract: w values and the summary statistics.
    """
    params = profile.params
    p, gamma = params.p, params.gamma
    t = profile.t_values
    w = gamma ** (p - 1.0) * (profile.b_values - gamma) + (2.0 / p) * t

    # -(2/p - 1) gamma + (2/(p gamma^(p-1))) ln(1 / (lam gamma^(2(p-1)) (mu^2 + r^2)))
    log_inverse = (
        -params.log_lambda
        - 2.0 * (p - 1.0) * math.log(gamma)
        - 2.0 * math.log(params.mu)
        - t
    )
    explicit = -(2.0 / p - 1.0) * gamma + (2.0 / (p * gamma ** (p - 1.0))) * log_inverse
    gap = profile.b_values - explicit

    return WGammaExtract(
        w_values=w,
        sup_ratio=float(np.max(np.abs(w) / (t + 1.0))),
        log_profile_gap=gap,
        log_profile_gap_scaled=float(np.max(np.abs(gap)) * gamma ** (p - 1.0)),
    )
