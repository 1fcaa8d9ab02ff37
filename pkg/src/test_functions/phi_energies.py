"""
Grid energies of sampled test functions and their normalized exponential density.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.torus.functional import energy_from_parts, log_exp_mass
from src.utils.errors import EmptyPositivePartError
from src.utils.utils import check_exponent, check_positive

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhiEnergies:
    """
    Energies of a sampled field.
    Attributes:
        dirichlet (float): Spectral integral of |grad phi|^2.
        l2h (float): Integral of h phi^2.
        logmass (float): ln int (exp(phi_+^p) - 1).
        j_value (float): J_{p,beta}.
    """

    dirichlet: float
    l2h: float
    logmass: float
    j_value: float


def phi_energies(field, p, beta):
    """
    Dirichlet energy, weighted L^2, log exponential mass and J of a field.
    Args:
        field (TorusField): Samples of phi.
        p (float): Exponent in (1, 2).
        beta (float): Energy level.
    Returns:
        PhiEnergies: The four energies.
    Raises:
        EmptyPositivePartError: If phi_+ vanishes (J would be +inf).
    """
    check_exponent(p, low=1.0, high=2.0, open_low=True)
    check_positive(beta=beta)
    logmass = log_exp_mass(field, p)
    if logmass == -math.inf:
        raise EmptyPositivePartError("test function has no positive part")
    dirichlet = field.dirichlet()
    l2h = field.integrate(field.h_values * field.values**2)
    j_value = energy_from_parts(dirichlet + l2h, logmass, p, beta)
    logger.debug(
        "phi energies: D=%.10g L2=%.10g logmass=%.10g J=%.10g",
        dirichlet,
        l2h,
        logmass,
        j_value,
    )
    return PhiEnergies(dirichlet=dirichlet, l2h=l2h, logmass=logmass, j_value=j_value)


def normalized_density(field, p):
    """
    (exp(phi_+^p) - 1) / int (exp(phi_+^p) - 1) as a field integrating to one.
    Args:
        field (TorusField): Samples of phi.
        p (float): Exponent.
    Returns:
        TorusField: Probability density on the torus.
    Raises:
        EmptyPositivePartError: If phi_+ vanishes.
    """
    exponent = np.maximum(field.values, 0.0) ** p
    peak = float(np.max(exponent))
    if peak == 0.0:
        raise EmptyPositivePartError("density of a field without positive part")
    if peak < 1.0:
        weights = np.expm1(exponent)
    else:
        weights = np.exp(exponent - peak) - math.exp(-peak)
    return field.with_values(weights / field.integrate(weights))


def mt_deficit(dirichlet, l2h, logmass, p):
    """
    logmass - (2-p)/2 (p ||phi||_h^2 / (8 pi))^(p/(2-p)).
    The subcritical Moser-Trudinger inequality keeps this bounded above uniformly.
    """
    scaled = p * (dirichlet + l2h) / (8.0 * math.pi)
    return logmass - (2.0 - p) / 2.0 * scaled ** (p / (2.0 - p))
