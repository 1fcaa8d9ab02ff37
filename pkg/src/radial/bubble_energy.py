"""
Energy masses of solved bubbles and their expansion in powers of gamma^(-p).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.radial.bubble_ode import BubbleParams, integrate_bubble, log_expm1
from src.utils.errors import InvalidParameterError, SingularFitError
from src.utils.utils import check_exponent, check_positive

logger = logging.getLogger(__name__)
logger.info("Bubble energy started")

RADIUS_RULES = ("neck", "sqrt_gamma")
NECK_CAP = 0.9
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class BubbleEnergy:
    """
    Masses of a bubble over its analysis ball.
    Attributes:
        gamma (float): Peak height.
        p (float): Exponent.
        h0 (float): Constant potential.
        radius_rule (str): How the analysis radius was chosen.
        mass_weighted (float): (lam p^2 / 2) * integral of B^p exp(B^p).
        mass_plain (float): (lam p^2 / 2) * integral of exp(B^p).
        product (float): mass_plain^((2-p)/p) * mass_weighted^(2(p-1)/p).
        s_bar (float): Rescaled analysis radius rbar / mu.
        log_mu (float): Log of the concentration scale used.
    """

    gamma: float
    p: float
    h0: float
    radius_rule: str
    mass_weighted: float
    mass_plain: float
    product: float
    s_bar: float
    log_mu: float

    @property
    def excess(self):
        """product - 4 pi."""
        return self.product - 4.0 * math.pi


@dataclass(frozen=True)
class ExpansionFit:
    """
    Least-squares coefficients of value ~ c0 + c1 gamma^(-p) + c2 gamma^(-2p) + ...
    Attributes:
        c0 (float): Constant term.
        c1 (float): gamma^(-p) coefficient.
        c2 (float): gamma^(-2p) coefficient.
        residual (float): Max relative misfit over the samples.
        gammas (tuple): Sample heights.
        p (float): Exponent of the basis.
        higher (tuple): Coefficients of gamma^(-3p), gamma^(-4p), ... when fitted.
    """

    c0: float
    c1: float
    c2: float
    residual: float
    gammas: tuple
    p: float
    higher: tuple = ()


def energy_scale(gamma, p, rbar_scale=1.0):
    """
    Concentration scale placing the Liouville zero radius at rbar_scale * gamma^(-2p).
    Args:
        gamma (float): Peak height.
        p (float): Exponent.
        rbar_scale (float): Multiple of gamma^(-2p) for the outer radius.
    Returns:
        float: log(mu).
    """
    return (
        math.log(rbar_scale)
        - 2.0 * p * math.log(gamma)
        - 0.5 * log_expm1(0.5 * p * gamma**p)
    )


def _log_one_plus_square(tau):
    """ln(1 + e^(2 tau)) without overflow."""
    if tau > 20.0:
        return 2.0 * tau + math.log1p(math.exp(-2.0 * tau))
    return math.log1p(math.exp(2.0 * tau))


def bubble_energy(
    gamma, p, h0=1.0, radius_rule="neck", rbar_scale=1.0, rtol=1e-10, atol=1e-14
):
    """
    Weighted and plain masses of the solved bubble, and their energy product.

    The "neck" rule truncates at the first upward zero of the neck slope (or where
    B = gamma / 10, whichever comes first) and adds the Liouville tail in closed
    form. The "sqrt_gamma" rule truncates at t(rbar) = sqrt(gamma) without a tail.
    Args:
        gamma (float): Peak height, >= 4.
        p (float): Exponent in [1, 2].
        h0 (float): Constant potential.
        radius_rule (str): "neck" or "sqrt_gamma".
        rbar_scale (float): Multiple of gamma^(-2p) for the zero radius of the scale.
        rtol (float): Relative tolerance of the integrator.
        atol (float): Absolute tolerance of the integrator.
    Returns:
        BubbleEnergy: Masses and product.
    """
    check_positive(gamma=gamma, h0=h0, rbar_scale=rbar_scale)
    check_exponent(p, low=1.0)
    if gamma < 4.0:
        raise InvalidParameterError(f"gamma must be at least 4, got {gamma}")
    if radius_rule not in RADIUS_RULES:
        raise InvalidParameterError(f"radius_rule must be one of {RADIUS_RULES}")

    log_mu = energy_scale(gamma, p, rbar_scale)
    params = BubbleParams.from_scale(gamma, p, math.exp(log_mu), h0=h0)
    gamma_p = gamma**p
    tau_limit = math.log(params.rbar / params.mu)

    if radius_rule == "neck":
        solution, _ = integrate_bubble(
            params, tau_limit, rtol=rtol, atol=atol, stop_at_neck=True, x_cap=NECK_CAP
        )
        tau_bar = solution.t[-1]
        log_u = _log_one_plus_square(tau_bar)
        inverse_u = math.exp(-log_u)
        plain = solution.y[2, -1] + 0.5 * inverse_u
        weighted = (
            gamma_p * solution.y[3, -1]
            + 0.5 * gamma_p * inverse_u
            - (log_u + 1.0) * inverse_u
        )
    else:
        t_bar = math.sqrt(gamma)
        if t_bar > params.t_ceiling:
            raise InvalidParameterError("sqrt(gamma) exceeds p gamma^p / 2")
        tau_bar = 0.5 * log_expm1(t_bar)
        solution, _ = integrate_bubble(params, tau_bar, rtol=rtol, atol=atol)
        plain = solution.y[2, -1]
        weighted = gamma_p * solution.y[3, -1]

    # lam p^2 / 2 * 2 pi mu^2 e^(gamma^p) = 8 pi gamma^(-2(p-1))
    prefactor = 8.0 * math.pi * gamma ** (-2.0 * (p - 1.0))
    mass_plain = prefactor * plain
    mass_weighted = prefactor * weighted
    product = math.exp(
        (2.0 - p) / p * math.log(mass_plain)
        + 2.0 * (p - 1.0) / p * math.log(mass_weighted)
    )
    logger.info(
        "Bubble energy gamma=%.4g p=%.4g rule=%s: product %.15g",
        gamma,
        p,
        radius_rule,
        product,
    )
    return BubbleEnergy(
        gamma=gamma,
        p=p,
        h0=h0,
        radius_rule=radius_rule,
        mass_weighted=mass_weighted,
        mass_plain=mass_plain,
        product=product,
        s_bar=math.exp(tau_bar),
        log_mu=log_mu,
    )


def mass_predictions(gamma, p):
    """
    Second order asymptotic predictions of the two masses and the product.
    Args:
        gamma (float): Peak height.
        p (float): Exponent.
    Returns:
        dict: mass_weighted, mass_plain and product predictions.
    """
    pi2 = math.pi**2
    x = gamma ** (-p)
    bracket = (p - 1.0) * (pi2 / 3.0 + 16.5) + 1.5 * (p - 2.0) - 3.5 * (4.0 * p - 5.0)
    weighted_second = (p - 1.0) / p**2 * (
        -8.0
        - 2.0 * pi2 / 3.0
        + 2.0 * (p - 1.0) * (pi2 / 3.0 + 16.5)
        + 3.0 * (p - 2.0)
        - 7.0 * (4.0 * p - 5.0)
    )
    plain_second = (
        2.0 * (p - 1.0) / p**2 * bracket
        + 4.0 * (p - 1.0) / p
        + (p - 1.0) ** 2 / p**2 * (8.0 + 2.0 * pi2 / 3.0)
    )
    return {
        "mass_weighted": 4.0 * math.pi * gamma ** (2.0 - p)
        * (1.0 + 2.0 * (p - 2.0) / p * x + weighted_second * x * x),
        "mass_plain": 4.0 * math.pi * gamma ** (-2.0 * (p - 1.0))
        * (1.0 + 4.0 * (p - 1.0) / p * x + plain_second * x * x),
        "product": 4.0 * math.pi * (1.0 + 4.0 * (p - 1.0) / p**2 * x * x),
    }


def fit_expansion(samples, p, extra_terms=0):
    """
    Least-squares fit of sampled values on the basis {1, gamma^(-p), gamma^(-2p)}.

    extra_terms adds the columns gamma^(-3p), gamma^(-4p), ... so that the
    truncation of the series does not leak into c2. Columns are scaled by the
    largest gamma^(-p) before the condition check and the solve.
    Args:
        samples (list): (gamma, value) pairs with distinct gammas, at least 4
            and at least as many as fitted columns.
        p (float): Exponent of the basis.
        extra_terms (int): Number of higher powers fitted alongside.
    Returns:
        ExpansionFit: Coefficients and max relative misfit.
    Raises:
        InvalidParameterError: Too few samples, repeated gammas or negative extra_terms.
        SingularFitError: If the scaled design condition number exceeds 1e12.
    """
    gammas = np.array([float(gamma) for gamma, _ in samples])
    values = np.array([float(value) for _, value in samples])
    if extra_terms < 0:
        raise InvalidParameterError(f"extra_terms must be >= 0, got {extra_terms}")
    columns = 3 + extra_terms
    needed = max(4, columns)
    if gammas.size < needed or np.unique(gammas).size != gammas.size:
        raise InvalidParameterError(
            f"fit with {columns} columns needs at least {needed} samples"
            " with distinct gamma"
        )

    x = gammas ** (-p)
    scale = float(np.max(x))
    design = np.vander(x / scale, columns, increasing=True)
    condition = np.linalg.cond(design)
    if condition > MAX_CONDITION:
        raise SingularFitError(f"design matrix condition {condition:.3e} exceeds 1e12")

    scaled, *_ = np.linalg.lstsq(design, values, rcond=None)
    misfit = np.max(np.abs(design @ scaled - values) / np.abs(values))
    coefficients = scaled / scale ** np.arange(columns)
    order = np.argsort(gammas)
    return ExpansionFit(
        c0=float(coefficients[0]),
        c1=float(coefficients[1]),
        c2=float(coefficients[2]),
        residual=float(misfit),
        gammas=tuple(float(g) for g in gammas[order]),
        p=p,
        higher=tuple(float(c) for c in coefficients[3:]),
    )
