"""
Blow-up diagnostics: peak heights, concentration scales, local masses and the
distance of the exponential density to a fitted sum of Dirac masses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.ndimage import maximum_filter

from src.radial.bubble_ode import lambda_of, mu_of, t_gamma
from src.test_functions.barycenter import Barycenter
from src.test_functions.kr_distance import kr_distance
from src.test_functions.phi_energies import normalized_density
from src.torus.functional import beta_of
from src.torus.torus_field import torus_distance
from src.utils.utils import check_exponent, check_positive

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
PROFILE_RADIUS = 5.0
MIN_RELIEF = 1e-6


@dataclass(frozen=True)
class PeakDiagnostic:
    """
    One local maximum of a solution.
    Attributes:
        x (float): Peak abscissa.
        y (float): Peak ordinate.
        gamma (float): Peak value.
        mu (float): Concentration scale from gamma and lam.
        local_mass_ratio (float): (lam p^2 / 2) int_ball u^p exp(u^p), divided
            by 4 pi gamma^(2-p).
        ball_radius (float): Radius of the ball used for the local mass.
        profile_deviation (float): sup over s <= 5 of |z(s) - ln(1 + s^2)|,
            None if unresolved.
    """

    x: float
    y: float
    gamma: float
    mu: float
    local_mass_ratio: float
    ball_radius: float
    profile_deviation: float = None


@dataclass(frozen=True)
class BlowUpReport:
    """
    Peak table and global quantities of a solution.
    Attributes:
        peaks (tuple): PeakDiagnostic entries, highest first.
        beta_value (float): beta_of(u, lam, p).
        beta_excess (float): beta_value - 4 pi * number of peaks.
        kr_to_dirac (float): KR distance of the density to the fitted Dirac sum.
        kr_residual (float): Extrapolation uncertainty of kr_to_dirac.
    """

    peaks: tuple
    beta_value: float
    beta_excess: float
    kr_to_dirac: float = None
    kr_residual: float = None

    def to_frame(self):
        """Peak table; unresolved profile deviations are written as -1."""
        columns = [
            "peak",
            "x",
            "y",
            "gamma",
            "mu",
            "local_mass_ratio",
            "ball_radius",
            "profile_deviation",
        ]
        rows = [
            {
                "peak": index,
                "x": peak.x,
                "y": peak.y,
                "gamma": peak.gamma,
                "mu": peak.mu,
                "local_mass_ratio": peak.local_mass_ratio,
                "ball_radius": peak.ball_radius,
                "profile_deviation": (
                    -1.0 if peak.profile_deviation is None else peak.profile_deviation
                ),
            }
            for index, peak in enumerate(self.peaks)
        ]
        return pd.DataFrame(rows, columns=columns)


def find_peaks(u):
    """
    Grid indices of periodic local maxima above half of max u, highest first.
    A field with no relief has no peaks.
    """
    values = u.values
    u_max = float(np.max(values))
    if u_max <= 0.0 or float(np.ptp(values)) < MIN_RELIEF * max(1.0, abs(u_max)):
        return []
    is_max = values == maximum_filter(values, size=3, mode="wrap")
    candidates = np.argwhere(is_max & (values > 0.5 * u_max))
    indices = (tuple(int(i) for i in index) for index in candidates)
    return sorted(indices, key=lambda ij: (-values[ij], ij))


def _local_mass_ratio(u, lam, p, gamma, ball):
    exponent = np.maximum(u.values, 0.0) ** p
    peak = float(np.max(exponent[ball]))
    body = u.integrate(np.where(ball, exponent * np.exp(exponent - peak), 0.0))
    log_mass = math.log(lam * p * p / 2.0) + peak + math.log(body)
    return math.exp(log_mass - math.log(FOUR_PI) - (2.0 - p) * math.log(gamma))


def _profile_deviation(u, p, gamma, mu, distance):
    if PROFILE_RADIUS * mu < 2.0 * u.spacing:
        return None
    inside = distance <= PROFILE_RADIUS * mu
    deficit = 0.5 * p * gamma ** (p - 1.0) * (gamma - u.values[inside])
    return float(np.max(np.abs(deficit - t_gamma(distance[inside], mu))))


def blow_up_diagnostics(u, lam, p, with_kr=True):
    """
    Locate peaks of u and measure how bubble-like each one is.
    Args:
        u (TorusField): Solution samples.
        lam (float): Multiplier of the solution.
        p (float): Exponent in [1, 2].
        with_kr (bool): Also compute the KR distance to the fitted Dirac sum.
    Returns:
        BlowUpReport: Peak table and excess over 4 pi per peak.
    """
    check_exponent(p, low=1.0)
    check_positive(lam=lam)
    beta_value = beta_of(u, lam, p)
    indices = find_peaks(u)
    if not indices:
        return BlowUpReport(peaks=(), beta_value=beta_value, beta_excess=beta_value)

    x, y = u.coordinates()
    centers = np.array([(x[ij], y[ij]) for ij in indices])
    radius = 0.25 * u.box_length
    if len(centers) > 1:
        pairwise = torus_distance(
            centers[:, None, :], centers[None, :, :], u.box_length
        )
        separation = float(np.min(pairwise[~np.eye(len(centers), dtype=bool)]))
        radius = min(radius, 0.5 * separation)

    grid_points = np.stack((x, y), axis=-1)
    peaks, balls = [], []
    for ij, center in zip(indices, centers):
        gamma = float(u.values[ij])
        mu = mu_of(gamma, p, lam)
        distance = torus_distance(grid_points, center, u.box_length)
        ball = distance <= radius
        balls.append(ball)
        peaks.append(
            PeakDiagnostic(
                x=float(center[0]),
                y=float(center[1]),
                gamma=gamma,
                mu=mu,
                local_mass_ratio=_local_mass_ratio(u, lam, p, gamma, ball),
                ball_radius=radius,
                profile_deviation=_profile_deviation(u, p, gamma, mu, distance),
            )
        )

    kr_value, kr_residual = None, None
    if with_kr:
        density = normalized_density(u, p)
        masses = np.array(
            [density.integrate(np.where(ball, density.values, 0.0)) for ball in balls]
        )
        sigma = Barycenter.build(centers, masses / masses.sum(), u.box_length)
        result = kr_distance(density, sigma)
        kr_value, kr_residual = result.distance, result.residual

    beta_excess = beta_value - FOUR_PI * len(peaks)
    logger.info("Found %d peak(s); beta excess %.6g", len(peaks), beta_excess)
    return BlowUpReport(
        peaks=tuple(peaks),
        beta_value=beta_value,
        beta_excess=beta_excess,
        kr_to_dirac=kr_value,
        kr_residual=kr_residual,
    )


def plant_bubble(template, center, gamma, p, mu):
    """
    Sample the leading-order bubble gamma - 2/(p gamma^(p-1)) ln(1 + d^2/mu^2).
    Args:
        template (TorusField): Grid and weight.
        center (tuple): Bubble centre.
        gamma (float): Peak height.
        p (float): Exponent.
        mu (float): Concentration scale.
    Returns:
        tuple: (TorusField, lam) with lam tied to (gamma, p, mu).
    """
    lam, _ = lambda_of(gamma, p, mu)
    x, y = template.coordinates()
    distance = torus_distance(
        np.stack((x, y), axis=-1),
        np.asarray(center, dtype=float),
        template.box_length,
    )
    values = gamma - 2.0 / (p * gamma ** (p - 1.0)) * t_gamma(distance, mu)
    return template.with_values(values), lam
