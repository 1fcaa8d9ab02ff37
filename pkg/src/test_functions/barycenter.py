"""
Barycenter test functions: truncated log bubbles centred at the points of a
weighted configuration on the torus, with heights shifted so that each bubble
carries its prescribed share of the exponential mass.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect
from scipy.special import logsumexp

from src.torus.functional import energy_from_parts
from src.torus.torus_field import torus_displacement, torus_distance
from src.utils.errors import (
    BracketFailureError,
    InvalidParameterError,
    SupportOverlapError,
    UnderResolvedError,
)
from src.utils.utils import check_exponent, check_positive

logger = logging.getLogger(__name__)
logger.info("Barycenter test functions started")

MIN_CELLS_PER_SUPPORT = 4


@dataclass(frozen=True)
class Barycenter:
    """
    Weighted point configuration sum_i t_i delta_{x_i} on the torus [0, L)^2.
    Attributes:
        points (tuple): (x, y) pairs.
        weights (tuple): Non-negative weights summing to 1.
        box_length (float): Torus side L.
    """

    points: tuple
    weights: tuple
    box_length: float = 1.0

    def __post_init__(self):
        if len(self.points) != len(self.weights) or not self.points:
            raise InvalidParameterError(
                "points and weights must be non-empty and aligned"
            )
        if any(weight < 0.0 for weight in self.weights):
            raise InvalidParameterError("weights must be non-negative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise InvalidParameterError("weights must sum to 1")
        for point in self.points:
            if len(point) != 2 or not all(0.0 <= c < self.box_length for c in point):
                raise InvalidParameterError(
                    f"point {point} outside the fundamental domain"
                )

    @classmethod
    def build(cls, points, weights, box_length=1.0):
        """Construct from any sequences, wrapping points into [0, L)."""
        try:
            coords = np.asarray(points, dtype=float)
            weights = tuple(float(w) for w in weights)
        except (TypeError, ValueError) as e:
            raise InvalidParameterError(
                f"points and weights must be numbers: {e}"
            ) from e
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise InvalidParameterError(f"points must be (x, y) pairs, got {points!r}")
        wrapped = tuple(
            (float(x), float(y)) for x, y in np.mod(coords, float(box_length))
        )
        return cls(wrapped, weights, float(box_length))

    @property
    def k(self):
        """Number of points."""
        return len(self.points)

    def min_separation(self):
        """Smallest pairwise geodesic distance (infinity for a single point)."""
        if self.k < 2:
            return math.inf
        pts = np.array(self.points)
        distances = torus_distance(pts[:, None, :], pts[None, :, :], self.box_length)
        return float(np.min(distances[~np.eye(self.k, dtype=bool)]))


def peak_scale(p):
    """(2/p)^(1/p), the peak of a unit-height bubble."""
    return (2.0 / p) ** (1.0 / p)


def log_r_gamma(gamma, p):
    """log r_gamma with r_gamma = gamma^(-1) exp(-gamma^p / 2)."""
    return -math.log(gamma) - 0.5 * gamma**p


def support_radius(gamma, p):
    """delta_gamma = r_gamma sqrt(exp(gamma^p) - 1)."""
    return math.exp(-math.log(gamma)) * math.sqrt(-math.expm1(-(gamma**p)))


@dataclass(frozen=True)
class TestFunctionParams:
    """
    Shape data of a barycenter test function.
    Attributes:
        gamma (float): Height parameter.
        p (float): Exponent.
        log_r_gamma (float): Log of the core radius.
        delta_gamma (float): Support radius of an unshifted bubble.
        taus (tuple): Height shifts, one per point.
    """

    __test__ = False

    gamma: float
    p: float
    log_r_gamma: float
    delta_gamma: float
    taus: tuple

    def __post_init__(self):
        ceiling = peak_scale(self.p) * self.gamma
        if any(not 0.0 <= tau <= ceiling * (1.0 + 1e-12) for tau in self.taus):
            raise InvalidParameterError("shifts must lie in [0, (2/p)^(1/p) gamma]")

    @classmethod
    def for_barycenter(cls, sigma, gamma, p):
        """Solve one shift per weight of sigma."""
        check_positive(gamma=gamma)
        check_exponent(p)
        taus = tuple(tau_solve(weight, gamma, p) for weight in sigma.weights)
        return cls(gamma, p, log_r_gamma(gamma, p), support_radius(gamma, p), taus)


def _shifted_exponent(v, gamma, p, tau):
    """(phi_gamma - tau)_+^p as a function of v = ln(1 + |x|^2 / r^2)."""
    height = peak_scale(p) * gamma * (1.0 - v / gamma**p) - tau
    return np.maximum(height, 0.0) ** p


def _excess(log_weight, exponent, shift):
    """exp(log_weight - shift) * (exp(exponent) - 1), without overflow."""
    exponent = np.asarray(exponent, dtype=float)
    small = exponent < 1.0
    safe_small = np.where(small, exponent, 0.0)
    safe_large = np.where(small, 1.0, exponent)
    return np.where(
        small,
        np.exp(log_weight - shift) * np.expm1(safe_small),
        np.exp(log_weight + safe_large - shift) * -np.expm1(-safe_large),
    )


def log_bubble_mass(tau, gamma, p):
    """
    log of the plane integral of exp((phi_gamma - tau)_+^p) - 1.
    Args:
        tau (float): Shift in [0, (2/p)^(1/p) gamma).
        gamma (float): Height.
        p (float): Exponent.
    Returns:
        float: log mass, -inf when tau reaches the peak.
    """
    gamma_p = gamma**p
    edge = gamma_p * (1.0 - tau / (peak_scale(p) * gamma))
    if edge <= 0.0:
        return -math.inf
    # exp(a(v) + v) is convex in v, so its maximum sits at an end point
    shift = max(float(_shifted_exponent(0.0, gamma, p, tau)), edge)

    def integrand(v):
        return float(_excess(v, _shifted_exponent(v, gamma, p, tau), shift))

    breakpoints = [min(40.0, 0.5 * edge)] if edge > 2.0 else None
    value, _ = quad(
        integrand, 0.0, edge, epsabs=0.0, epsrel=1e-12, limit=400, points=breakpoints
    )
    if value <= 0.0:
        return -math.inf
    return math.log(math.pi) + 2.0 * log_r_gamma(gamma, p) + shift + math.log(value)


def tau_solve(t, gamma, p):
    """
    Shift tau with mass(tau) / mass(0) = t, by bisection.
    Args:
        t (float): Mass fraction in [0, 1].
        gamma (float): Height.
        p (float): Exponent.
    Returns:
        float: tau in [0, (2/p)^(1/p) gamma].
    Raises:
        BracketFailureError: If the mass ratio is not decreasing in tau.
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidParameterError(f"t must lie in [0, 1], got {t}")
    check_positive(gamma=gamma)
    tau_max = peak_scale(p) * gamma
    if t == 1.0:
        return 0.0
    if t == 0.0:
        return tau_max

    reference = log_bubble_mass(0.0, gamma, p)
    target = math.log(t)

    def gap(tau):
        return log_bubble_mass(tau, gamma, p) - reference - target

    upper = tau_max * (1.0 - 1e-9)
    samples = np.linspace(0.0, upper, 6)
    values = [gap(tau) for tau in samples]
    if any(later > earlier for earlier, later in zip(values, values[1:])):
        raise BracketFailureError("mass ratio is not monotone in tau")
    if values[-1] > 0.0:
        logger.warning(
            "t=%.3e below the resolvable mass ratio, using the peak shift", t
        )
        return upper
    tau = bisect(gap, 0.0, upper, xtol=1e-14 * tau_max, maxiter=200)
    logger.debug("tau(t=%.6g, gamma=%.6g, p=%.4g) = %.12g", t, gamma, p, tau)
    return tau


def check_supports(sigma, params, spacing):
    """
    Refuse configurations whose bubbles overlap or are not resolved.
    Raises:
        SupportOverlapError: If 2 delta >= min separation or delta >= L / 4.
        UnderResolvedError: If delta spans fewer than four cells.
    """
    delta = params.delta_gamma
    if delta >= 0.25 * sigma.box_length:
        raise SupportOverlapError(
            f"support radius {delta:.4g} exceeds a quarter of the box"
        )
    if 2.0 * delta >= sigma.min_separation():
        raise SupportOverlapError("bubble supports intersect")
    if delta < MIN_CELLS_PER_SUPPORT * spacing:
        raise UnderResolvedError(
            f"support radius {delta:.3e} is below {MIN_CELLS_PER_SUPPORT} cells"
            f" of {spacing:.3e}"
        )


def build_phi(sigma, gamma, p, grid, params=None):
    """
    Sample phi_{gamma, sigma}.

    phi = ln^(1/p)(1 + sum_i (exp((phi_{gamma,x_i} - tau_i)_+^p) - 1)).
    Args:
        sigma (Barycenter): Configuration; box must match the grid.
        gamma (float): Height.
        p (float): Exponent.
        grid (TorusField): Template supplying box, resolution and weight h.
        params (TestFunctionParams): Precomputed shifts, solved when omitted.
    Returns:
        TorusField: The sampled test function.
    """
    if abs(sigma.box_length - grid.box_length) > 1e-12 * grid.box_length:
        raise InvalidParameterError("barycenter and grid use different boxes")
    params = params or TestFunctionParams.for_barycenter(sigma, gamma, p)
    check_supports(sigma, params, grid.spacing)

    x_axis = np.arange(grid.n) * grid.spacing
    log_r2 = 2.0 * params.log_r_gamma
    exponents = []
    for (cx, cy), tau in zip(sigma.points, params.taus):
        dx = torus_displacement(x_axis, cx, grid.box_length)
        dy = torus_displacement(x_axis, cy, grid.box_length)
        distance2 = dx[:, None] ** 2 + dy[None, :] ** 2
        v = np.log1p(np.exp(np.log(np.maximum(distance2, 1e-300)) - log_r2))
        v = np.where(distance2 > 0.0, v, 0.0)
        exponents.append(_shifted_exponent(v, gamma, p, tau))

    stacked = np.stack(exponents)
    peak = np.max(stacked, axis=0)
    # ln(1 + sum expm1(a_i)), shifted by the largest exponent where it is big
    small = np.log1p(np.sum(np.expm1(np.minimum(stacked, 1.0)), axis=0))
    large = peak + np.log(
        np.exp(-peak) + np.sum(np.exp(stacked - peak) - np.exp(-peak), axis=0)
    )
    power = np.where(peak < 1.0, small, large)
    return grid.with_values(np.maximum(power, 0.0) ** (1.0 / p))


@dataclass(frozen=True)
class ReferenceEnergies:
    """
    Plane-integral energies of a barycenter test function with disjoint supports.
    Attributes:
        dirichlet (float): Integral of |grad phi|^2.
        l2h (float): Integral of h0 phi^2.
        logmass (float): log of the integral of exp(phi^p) - 1.
    """

    dirichlet: float
    l2h: float
    logmass: float

    def functional(self, p, beta):
        """J_{p, beta} from the three parts."""
        return energy_from_parts(self.dirichlet + self.l2h, self.logmass, p, beta)


def reference_energies(gamma, p, taus, h0=1.0):
    """
    Energies of the test function computed radially, valid at any gamma.
    Args:
        gamma (float): Height.
        p (float): Exponent in (1, 2).
        taus (list): Shift of each bubble.
        h0 (float): Constant weight.
    Returns:
        ReferenceEnergies: Dirichlet, weighted L^2 and log mass.
    """
    gamma_p = gamma**p
    c = peak_scale(p)
    log_r2 = 2.0 * log_r_gamma(gamma, p)
    dirichlet = 0.0
    l2 = 0.0
    log_masses = []
    for tau in taus:
        edge = gamma_p * (1.0 - tau / (c * gamma))
        if edge <= 0.0:
            continue
        # the gradient of ln(1 + rho^2) integrates in closed form over the support
        shell = 4.0 * math.pi * (edge + math.expm1(-edge))
        dirichlet += c * c * gamma ** (2.0 - 2.0 * p) * shell

        def square(v, tau=tau, edge=edge):
            height = c * gamma * (1.0 - v / gamma_p) - tau
            return height * height * math.exp(v - edge)

        value, _ = quad(square, 0.0, edge, epsabs=0.0, epsrel=1e-12, limit=400)
        # area element pi r^2 e^v dv; r^2 e^edge stays representable
        l2 += math.pi * math.exp(log_r2 + edge) * value
        log_masses.append(log_bubble_mass(tau, gamma, p))

    logmass = float(logsumexp(log_masses)) if log_masses else -math.inf
    return ReferenceEnergies(dirichlet=dirichlet, l2h=h0 * l2, logmass=logmass)


def lowsublevel_slope(p, beta, k):
    """
    Large-gamma limit of J(phi_{gamma,sigma}) / gamma^p.

    Equals (2-p)/p [(4 pi k / beta)^(p/(2-p)) - 1].
    """
    return (2.0 - p) / p * ((4.0 * math.pi * k / beta) ** (p / (2.0 - p)) - 1.0)
