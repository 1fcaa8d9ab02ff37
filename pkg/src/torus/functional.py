"""
The energy J_{p,beta}, its Riesz gradient and the multiplier relations on the torus.

For p < 2:
    J(u) = (2-p)/2 (p ||u||_h^2 / (2 beta))^(p/(2-p)) - ln int (exp(u_+^p) - 1)
For p = 2 the functional is -ln int (exp(u_+^2) - 1), taken on the sphere
||u||_h^2 = beta.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from src.utils.errors import EmptyPositivePartError
from src.utils.utils import check_exponent, check_positive

logger = logging.getLogger(__name__)


def is_critical_exponent(p):
    """True at the endpoint p = 2, where the constrained form is used."""
    return p >= 2.0


def _powers(field, p):
    positive = np.maximum(field.values, 0.0)
    return positive, positive**p


def log_exp_mass(field, p):
    """
    ln int (exp(u_+^p) - 1), evaluated with a shift so that no exponential overflows.
    Args:
        field (TorusField): Samples of u.
        p (float): Exponent.
    Returns:
        float: The log mass, -inf when u_+ vanishes.
    """
    _, exponent = _powers(field, p)
    peak = float(np.max(exponent))
    if peak == 0.0:
        return -math.inf
    if peak < 1.0:
        return math.log(field.integrate(np.expm1(exponent)))
    total = field.integrate(np.exp(exponent - peak) - math.exp(-peak))
    return peak + math.log(total)


def weighted_exp_integral(field, p):
    """int u_+^p exp(u_+^p), returned as (log of the value)."""
    _, exponent = _powers(field, p)
    peak = float(np.max(exponent))
    if peak == 0.0:
        return -math.inf
    return peak + math.log(field.integrate(exponent * np.exp(exponent - peak)))


def energy_from_parts(norm_squared, logmass, p, beta):
    """
    J_{p,beta} assembled from ||u||_h^2 and the log mass.
    Args:
        norm_squared (float): ||u||_h^2.
        logmass (float): ln int (exp(u_+^p) - 1).
        p (float): Exponent in (1, 2].
        beta (float): Energy level.
    Returns:
        float: J, +inf when the log mass is -inf.
    """
    if logmass == -math.inf:
        return math.inf
    if is_critical_exponent(p):
        return -logmass
    scaled = p * norm_squared / (2.0 * beta)
    if scaled <= 0.0:
        return -logmass
    return (2.0 - p) / 2.0 * math.exp(p / (2.0 - p) * math.log(scaled)) - logmass


def j_functional(u, p, beta):
    """
    Evaluate J_{p,beta}(u).
    Args:
        u (TorusField): Samples of u.
        p (float): Exponent in (1, 2].
        beta (float): Positive energy level.
    Returns:
        float: J, or +inf when u <= 0 everywhere.
    """
    check_exponent(p, low=1.0, high=2.0, open_low=True)
    check_positive(beta=beta)
    return energy_from_parts(u.norm_h_squared(), log_exp_mass(u, p), p, beta)


def nonlinearity(field, p):
    """p u_+^(p-1) exp(u_+^p), the derivative of exp(u_+^p) - 1."""
    positive, exponent = _powers(field, p)
    return p * positive ** (p - 1.0) * np.exp(exponent)


def gradient_constant(p, beta):
    """C_{p,beta} = p (p / (2 beta))^(p/(2-p))."""
    return p * (p / (2.0 * beta)) ** (p / (2.0 - p))


def j_gradient(u, p, beta):
    """
    Riesz representative of J' for the inner product <u, v>_h.

    C ||u||_h^((4p-4)/(2-p)) u minus (Delta + h)^(-1)[p u_+^(p-1) exp(u_+^p)]
    divided by int (exp(u_+^p) - 1). At p = 2 only the second term remains; the
    sphere projection is left to the caller.
    Args:
        u (TorusField): Samples of u.
        p (float): Exponent in (1, 2].
        beta (float): Positive energy level.
    Returns:
        TorusField: The gradient on the same grid.
    Raises:
        EmptyPositivePartError: If u_+ vanishes.
    """
    check_exponent(p, low=1.0, high=2.0, open_low=True)
    check_positive(beta=beta)
    logmass = log_exp_mass(u, p)
    if logmass == -math.inf:
        raise EmptyPositivePartError("the gradient needs a nontrivial positive part")
    positive, exponent = _powers(u, p)
    peak = float(np.max(exponent))
    # the shifted source divided by the shifted mass equals the unshifted ratio
    shifted = np.exp(exponent - peak) * math.exp(peak - logmass)
    source = p * positive ** (p - 1.0) * shifted
    pulled_back = u.solve_operator(source)
    if is_critical_exponent(p):
        return u.with_values(-pulled_back)
    norm_squared = u.norm_h_squared()
    scale = gradient_constant(p, beta) * norm_squared ** ((2.0 * p - 2.0) / (2.0 - p))
    return u.with_values(scale * u.values - pulled_back)


def lambda_from_u(u, p, beta):
    """
    Multiplier lam tied to u.

    For p < 2: (lam p^2 / 2)(p ||u||_h^2 / (2 beta))^(2(p-1)/(2-p)) times
    int (exp(u^p) - 1) equals beta.
    For p = 2: lam = beta / (2 int u^2 exp(u^2)).
    Args:
        u (TorusField): Samples of u.
        p (float): Exponent in (1, 2].
        beta (float): Positive energy level.
    Returns:
        float: lam > 0.
    Raises:
        EmptyPositivePartError: If u_+ vanishes.
    """
    check_exponent(p, low=1.0, high=2.0, open_low=True)
    check_positive(beta=beta)
    if is_critical_exponent(p):
        log_weighted = weighted_exp_integral(u, p)
        if log_weighted == -math.inf:
            raise EmptyPositivePartError("lambda needs a nontrivial positive part")
        return math.exp(math.log(beta / 2.0) - log_weighted)

    logmass = log_exp_mass(u, p)
    if logmass == -math.inf:
        raise EmptyPositivePartError("lambda needs a nontrivial positive part")
    scaled = p * u.norm_h_squared() / (2.0 * beta)
    log_lam = (
        math.log(2.0 * beta / p**2)
        - 2.0 * (p - 1.0) / (2.0 - p) * math.log(scaled)
        - logmass
    )
    return math.exp(log_lam)


def beta_of(u, lam, p):
    """
    beta recovered from a solution pair:
    (lam p^2 / 2)(int (exp(u^p) - 1))^((2-p)/p) (int u^p exp(u^p))^(2(p-1)/p).
    Args:
        u (TorusField): Samples of u.
        lam (float): Multiplier.
        p (float): Exponent in (1, 2].
    Returns:
        float: The energy level, 0.0 when u_+ vanishes.
    """
    logmass = log_exp_mass(u, p)
    log_weighted = weighted_exp_integral(u, p)
    if logmass == -math.inf or lam <= 0.0:
        return 0.0
    return math.exp(
        math.log(lam * p * p / 2.0)
        + (2.0 - p) / p * logmass
        + 2.0 * (p - 1.0) / p * log_weighted
    )


def el_residual(u, lam, p):
    """(Delta + h) u - lam p u_+^(p-1) exp(u_+^p) on the grid."""
    return u.apply_operator() - lam * nonlinearity(u, p)


def residual_l2(u, lam, p):
    """L^2 norm of the Euler-Lagrange residual."""
    residual = el_residual(u, lam, p)
    return math.sqrt(u.integrate(residual * residual))
