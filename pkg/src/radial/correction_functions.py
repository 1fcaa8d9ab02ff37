"""
First and second order corrections w0, w1 to the Liouville profile T0 = ln(1 + r^2).

Sign convention: Delta = -(d_xx + d_yy), so Delta T0 = -4 exp(-2 T0).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from src.utils.errors import InvalidParameterError, StepFailureError
from src.utils.utils import check_exponent

logger = logging.getLogger(__name__)

# w0(r) + T0(r) -> 2 + pi^2/6 as r -> infinity
W0_FAR_FIELD = 2.0 + math.pi**2 / 6.0
START_RADIUS = 1e-4


def log_ratio_kernel(sigma):
    """
    sigma / expm1(-sigma), the integrand of the w0 auxiliary integral after t = e^sigma.
    Its value at sigma = 0 is the removable limit -1.
    """
    if abs(sigma) < 1e-8:
        return -1.0 - 0.5 * sigma
    return sigma / math.expm1(-sigma)


def auxiliary_integral(t0):
    """
    Integral of ln(t) / (1 - t) over [1, e^t0], computed in sigma = ln t.
    Args:
        t0 (float): Upper limit in the log variable, t0 = ln(1 + r^2) >= 0.
    Returns:
        float: The integral value (<= 0).
    """
    if t0 == 0.0:
        return 0.0
    value, _ = quad(log_ratio_kernel, 0.0, t0, epsabs=0.0, epsrel=1e-13, limit=200)
    return value


def w0_from_t0(t0, aux=None):
    """
    Closed form of w0 written in the variable t0 = ln(1 + r^2).
    Args:
        t0 (float): Liouville variable.
        aux (float): Precomputed auxiliary integral at t0, computed when omitted.
    Returns:
        float: w0.
    """
    if aux is None:
        aux = auxiliary_integral(t0)
    decay = math.exp(-t0)  # 1 / (1 + r^2)
    return -t0 - 2.0 * math.expm1(-t0) - 0.5 * t0 * t0 + (2.0 * decay - 1.0) * aux


def w0_eval(r):
    """
    Evaluate w0(r) = -T0 + 2r^2/(1+r^2) - T0^2/2 + (1-r^2)/(1+r^2) * integral.
    Args:
        r (float): Rescaled radius, r >= 0.
    Returns:
        float: w0(r).
    """
    if r < 0:
        raise InvalidParameterError(f"r must be non-negative, got {r}")
    return w0_from_t0(math.log1p(r * r))


def w0_far_field_constant():
    """Limit of w0(r) + T0(r) at infinity."""
    return W0_FAR_FIELD


def forcing_term(p, t0, w0):
    """
    Source F of the w1 equation.
    Args:
        p (float): Exponent.
        t0 (float or np.ndarray): Liouville profile values.
        w0 (float or np.ndarray): First correction values.
    Returns:
        float or np.ndarray: F(t0, w0).
    """
    a = p - 1.0
    return (
        2.0 * a * w0
        + (p - 2.0) * t0**2
        - 8.0 * a * t0 * w0
        - (8.0 * p - 10.0) / 3.0 * t0**3
        + 4.0 * a * w0**2
        + 4.0 * a * t0**2 * w0
        + a * t0**4
    )


def integ5_target(p):
    """
    Closed-form total Laplacian mass of w1:
    16(p-1)/p^3 [(p-1)(pi^3/3 + 33 pi/2) + (3 pi/2)(p-2) - 7(4p-5) pi/2].
    """
    pi = math.pi
    return (
        16.0
        * (p - 1.0)
        / p**3
        * (
            (p - 1.0) * (pi**3 / 3.0 + 33.0 * pi / 2.0)
            + 1.5 * pi * (p - 2.0)
            - 3.5 * (4.0 * p - 5.0) * pi
        )
    )


@dataclass(frozen=True, eq=False)
class W1Solution:
    """
    Radial w1 on the integrator grid.
    Attributes:
        p (float): Exponent.
        s_grid (np.ndarray): Radii, starting at 0.
        w1_values (np.ndarray): w1 on the grid.
        laplacian_mass (float): Integral of Delta w1 over the plane, -2 pi lim s w1'(s).
        far_field_constant (float): Measured coefficient k in w1 ~ -k T0 at the
            outer decade.
    """

    p: float
    s_grid: np.ndarray
    w1_values: np.ndarray
    laplacian_mass: float
    far_field_constant: float


class W1System:
    """
    w1 ODE in tau = ln s with state [w1, s w1', K], K the running w0 auxiliary integral.
    """

    def __init__(self, p):
        self.p = p
        self.weight = 4.0 * (p - 1.0) / p**3

    def w0(self, t0, aux):
        """w0 from t0 and the carried auxiliary integral."""
        decay = 2.0 * np.exp(-t0) - 1.0
        return -t0 - 2.0 * np.expm1(-t0) - 0.5 * t0 * t0 + decay * aux

    def rhs(self, tau, state):
        """Classical radial Laplacian of w1 equals -4 exp(-2 T0) (2 w1 + c F)."""
        w1, q, aux = state
        s2 = math.exp(2.0 * tau)
        t0 = math.log1p(s2)
        w0 = self.w0(t0, aux)
        source = 2.0 * w1 + self.weight * forcing_term(self.p, t0, w0)
        # s^2 exp(-2 T0) = s^2 / (1 + s^2)^2
        kernel = s2 / (1.0 + s2) ** 2
        return [q, -4.0 * kernel * source, -2.0 * t0]

    @staticmethod
    def initial_state(s0=START_RADIUS):
        """w1 = O(s^6) at the origin; K ~ -t0 - t0^2/4."""
        t0 = math.log1p(s0 * s0)
        return [0.0, 0.0, -t0 - 0.25 * t0 * t0]


def solve_w1(p, s_max=1e6, rtol=1e-10, atol=1e-12, max_step=0.05):
    """
    Integrate the linear radial equation for w1 with w1(0) = w1'(0) = 0.
    Args:
        p (float): Exponent in (1, 2].
        s_max (float): Outer radius, >= 1e3.
        rtol (float): Relative tolerance.
        atol (float): Absolute tolerance.
        max_step (float): Largest step in tau = ln s.
    Returns:
        W1Solution: Grid values, total Laplacian mass and far-field coefficient.
    Raises:
        StepFailureError: If the adaptive controller fails.
    """
    check_exponent(p, low=1.0, high=2.0, open_low=True)
    if s_max < 1e3:
        raise InvalidParameterError(f"s_max must be at least 1e3, got {s_max}")

    system = W1System(p)
    tau0, tau_end = math.log(START_RADIUS), math.log(s_max)
    solution = solve_ivp(
        system.rhs,
        (tau0, tau_end),
        system.initial_state(),
        method="RK45",
        rtol=rtol,
        atol=atol,
        max_step=max_step,
        dense_output=True,
    )
    if solution.status != 0:
        logger.error("w1 integration failed for p=%.4g: %s", p, solution.message)
        raise StepFailureError(solution.message)

    flux = solution.y[1, -1]
    laplacian_mass = -2.0 * math.pi * flux

    inner_tau = tau_end - math.log(100.0)
    w_inner = solution.sol(inner_tau)[0]
    w_outer = solution.y[0, -1]
    t_inner = math.log1p(math.exp(2.0 * inner_tau))
    t_outer = math.log1p(s_max * s_max)
    far_field = -(w_outer - w_inner) / (t_outer - t_inner)

    logger.info(
        "w1 p=%.4g: laplacian mass %.12g, far-field %.8g", p, laplacian_mass, far_field
    )
    return W1Solution(
        p=p,
        s_grid=np.concatenate(([0.0], np.exp(solution.t))),
        w1_values=np.concatenate(([0.0], solution.y[0])),
        laplacian_mass=laplacian_mass,
        far_field_constant=far_field,
    )
