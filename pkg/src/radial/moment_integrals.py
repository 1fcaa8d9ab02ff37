"""
Exact moment integrals of the Liouville profile T0 = ln(1 + |x|^2) over the plane.

Every integrand is radial; in v = ln(1 + r^2) the area element is pi e^v dv, so
each integral becomes a one dimensional integral of exp(-a v) times a slowly
varying factor. Adaptive Gauss-Kronrod covers v <= ln(1 + S^2); the tail beyond
is closed-form for polynomial factors and a boundary flux for -Delta T0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from numpy.polynomial import Polynomial
from scipy.integrate import quad

from src.radial.correction_functions import (
    auxiliary_integral,
    w0_far_field_constant,
    w0_from_t0,
)
from src.utils.errors import QuadratureToleranceError

logger = logging.getLogger(__name__)
logger.info("Moment integrals started")

PI = math.pi


@dataclass(frozen=True)
class MomentIntegral:
    """
    One computed moment.
    Attributes:
        name (str): Identifier of the integral.
        value (float): Computed value.
        target (float): Closed-form value.
        error_estimate (float): Quadrature error plus tail model error.
    """

    name: str
    value: float
    target: float
    error_estimate: float

    @property
    def rel_err(self):
        """Relative deviation from the closed form."""
        return abs(self.value - self.target) / abs(self.target)


def exponential_polynomial_tail(decay, coefficients, start):
    """
    Integral of exp(-decay v) P(v) over [start, infinity).
    Args:
        decay (float): Positive rate a.
        coefficients (list): Coefficients of P, lowest degree first.
        start (float): Lower limit V.
    Returns:
        float: exp(-a V) * sum_k P^(k)(V) / a^(k+1).
    """
    poly = Polynomial(coefficients)
    total = 0.0
    for k in range(len(coefficients)):
        total += poly(start) / decay ** (k + 1)
        poly = poly.deriv()
    return math.exp(-decay * start) * total


def liouville_laplacian(r):
    """
    -Delta T0 = T0'' + T0' / r assembled from the radial derivatives of ln(1 + r^2).
    Args:
        r (float): Radius.
    Returns:
        float: The negative Laplacian at r.
    """
    r2 = r * r
    slope_over_r = 2.0 / (1.0 + r2)
    curvature = 2.0 * (1.0 - r2) / (1.0 + r2) ** 2
    return curvature + slope_over_r


def _laplacian_integrand(v):
    return PI * math.exp(v) * liouville_laplacian(math.sqrt(math.expm1(v)))


def _flux_tail(v_tail):
    """Flux through infinity minus flux through r = S: 2 pi (2 - S T0'(S))."""
    s2 = math.expm1(v_tail)
    return 2.0 * PI * (2.0 - 2.0 * s2 / (1.0 + s2))


def _polynomial_tail(*terms):
    def tail(v_tail):
        return sum(
            exponential_polynomial_tail(a, coeffs, v_tail) for a, coeffs in terms
        )

    return tail


def _moment_five_integrand(v):
    w0 = w0_from_t0(v, auxiliary_integral(v))
    return 4.0 * PI * math.exp(-v) * (-w0 + v * (2.0 * w0 + v * v - v))


def _moment_table():
    """
    (name, integrand in v, tail beyond v as a function, target).
    Polynomial tail coefficients already carry the pi factors of the area element.
    """
    c = w0_far_field_constant()
    return [
        (
            "int_4exp_minus_2T0",
            lambda v: 4.0 * PI * math.exp(-v),
            _polynomial_tail((1.0, [4.0 * PI])),
            4.0 * PI,
        ),
        ("minus_int_lap_T0", _laplacian_integrand, _flux_tail, 4.0 * PI),
        (
            "minus_int_T0_lap_T0",
            lambda v: 4.0 * PI * v * math.exp(-v),
            _polynomial_tail((1.0, [0.0, 4.0 * PI])),
            4.0 * PI,
        ),
        (
            "minus_half_int_T0sq_lap_T0",
            lambda v: 2.0 * PI * v * v * math.exp(-v),
            _polynomial_tail((1.0, [0.0, 0.0, 2.0 * PI])),
            4.0 * PI,
        ),
        (
            "int_w0_lap_T0_plus_T0_lap_w0",
            _moment_five_integrand,
            # w0 ~ -v + c in the tail
            _polynomial_tail(
                (1.0, [-4.0 * PI * c, 4.0 * PI * (1.0 + 2.0 * c), -12.0 * PI, 4.0 * PI])
            ),
            8.0 * PI + 2.0 * PI**3 / 3.0,
        ),
        (
            "int_ratio_T0sq",
            lambda v: PI * (math.exp(-v) - 2.0 * math.exp(-2.0 * v)) * v * v,
            _polynomial_tail((1.0, [0.0, 0.0, PI]), (2.0, [0.0, 0.0, -2.0 * PI])),
            1.5 * PI,
        ),
    ]


def moment_integrals(tol=1e-10, s_tail=1e4):
    """
    Compute the six moment integrals of T0, w0 and their Laplacians.
    Args:
        tol (float): Requested relative accuracy per integral.
        s_tail (float): Radius where quadrature hands over to the analytic tail.
    Returns:
        list: Six MomentIntegral values in a fixed order.
    Raises:
        QuadratureToleranceError: If an error estimate exceeds tol * |value|.
    """
    v_tail = math.log1p(s_tail * s_tail)
    results = []
    for name, integrand, tail_of, target in _moment_table():
        # half of the budget for the quadrature, half for the tail
        body, body_err = quad(
            integrand, 0.0, v_tail, epsabs=0.0, epsrel=0.25 * tol, limit=400
        )
        tail = tail_of(v_tail)
        tail_err = 0.0
        if name == "int_w0_lap_T0_plus_T0_lap_w0":
            # w0 + v - c = O(v^2 e^(-v)) beyond v_tail
            tail_err = 4.0 * PI * math.exp(-2.0 * v_tail) * (v_tail**4 + 1.0)
        value = body + tail
        error = body_err + tail_err
        if error > tol * abs(value):
            raise QuadratureToleranceError(
                f"{name}: error estimate {error:.3e} exceeds {tol:.1e} relative"
            )
        logger.info("Moment %s = %.15g (target %.15g)", name, value, target)
        results.append(
            MomentIntegral(name=name, value=value, target=target, error_estimate=error)
        )
    return results
