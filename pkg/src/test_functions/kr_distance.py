"""
Kantorovich-Rubinstein (1-Wasserstein) distance on the flat torus.

Entropic optimal transport (log-domain Sinkhorn from POT) at two
regularizations eps and eps/2, linearly extrapolated to eps = 0.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import ot

from src.torus.torus_field import torus_distance
from src.utils.errors import InvalidParameterError, NonConvergenceError
from src.utils.utils import check_positive

logger = logging.getLogger(__name__)

MAX_SUPPORT_SIDE = 64
DEFAULT_EPSILON_FRACTION = 0.01


@dataclass(frozen=True)
class KRDistance:
    """
    Extrapolated transport distance.
    Attributes:
        distance (float): Extrapolated W1, clipped at 0.
        residual (float): |W(eps/2) - W(eps)|, the extrapolation uncertainty.
        coarse (float): Entropic cost at eps.
        fine (float): Entropic cost at eps/2.
        epsilon (float): Coarse regularization.
        support_size (int): Number of source atoms after downsampling.
    """

    distance: float
    residual: float
    coarse: float
    fine: float
    epsilon: float
    support_size: int


def downsample_density(density, max_side=MAX_SUPPORT_SIDE):
    """
    Aggregate a density field into at most max_side^2 atoms.
    Args:
        density (TorusField): Probability density samples.
        max_side (int): Largest number of blocks per side.
    Returns:
        tuple: (points (m, 2), weights (m,)) with zero blocks dropped.
    """
    side = min(density.n, max_side)
    block = density.n // side
    mass = np.maximum(density.values, 0.0) * density.cell_area
    x, y = density.coordinates()

    def block_sum(samples):
        return samples.reshape(side, block, side, block).sum(axis=(1, 3)).ravel()

    weights = block_sum(mass)
    keep = weights > 0.0
    if not np.any(keep):
        raise InvalidParameterError("density has no mass")
    # blocks never straddle the periodic seam, so plain centroids are geodesic ones
    centroid_x = block_sum(mass * x)[keep] / weights[keep]
    centroid_y = block_sum(mass * y)[keep] / weights[keep]
    weights = weights[keep]
    return np.column_stack((centroid_x, centroid_y)), weights / weights.sum()


def entropic_cost(
    points_a,
    weights_a,
    points_b,
    weights_b,
    box_length,
    reg,
    num_iter=10000,
    stop_thr=1e-9,
):
    """
    Linear transport cost of the log-domain Sinkhorn plan.
    Raises:
        NonConvergenceError: If Sinkhorn reaches its iteration cap.
    """
    cost = torus_distance(points_a[:, None, :], points_b[None, :, :], box_length)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value, log = ot.sinkhorn2(
            np.asarray(weights_a, dtype=float),
            np.asarray(weights_b, dtype=float),
            cost,
            reg,
            method="sinkhorn_log",
            numItermax=num_iter,
            stopThr=stop_thr,
            log=True,
            warn=True,
        )
    if any("did not converge" in str(item.message) for item in caught):
        logger.error("Sinkhorn hit %d iterations at reg=%.3e", num_iter, reg)
        raise NonConvergenceError(
            f"Sinkhorn did not converge in {num_iter} iterations (reg={reg:.3e})"
        )
    logger.debug(
        "Sinkhorn reg=%.3e cost=%.12g iterations=%s",
        reg,
        float(value),
        log.get("niter"),
    )
    return float(value)


def discrete_kr(
    points_a, weights_a, points_b, weights_b, box_length, epsilon=None, num_iter=10000
):
    """
    Extrapolated W1 between two discrete measures on the torus.
    Args:
        points_a (np.ndarray): (m, 2) atoms.
        weights_a (np.ndarray): m weights summing to 1.
        points_b (np.ndarray): (k, 2) atoms.
        weights_b (np.ndarray): k weights summing to 1.
        box_length (float): Torus side.
        epsilon (float): Coarse regularization, 0.01 L by default.
        num_iter (int): Sinkhorn iteration cap.
    Returns:
        KRDistance: Distance and extrapolation data.
    """
    check_positive(box_length=box_length)
    epsilon = DEFAULT_EPSILON_FRACTION * box_length if epsilon is None else epsilon
    check_positive(epsilon=epsilon)
    points_a = np.atleast_2d(np.asarray(points_a, dtype=float))
    points_b = np.atleast_2d(np.asarray(points_b, dtype=float))
    measures = (points_a, weights_a, points_b, weights_b, box_length)
    coarse = entropic_cost(*measures, epsilon, num_iter)
    fine = entropic_cost(*measures, 0.5 * epsilon, num_iter)
    return KRDistance(
        distance=max(2.0 * fine - coarse, 0.0),
        residual=abs(fine - coarse),
        coarse=coarse,
        fine=fine,
        epsilon=epsilon,
        support_size=len(points_a),
    )


def kr_distance(
    density, sigma, epsilon=None, max_side=MAX_SUPPORT_SIDE, num_iter=10000
):
    """
    KR distance between a density field and a barycenter.
    Args:
        density (TorusField): Normalized density.
        sigma (Barycenter): Weighted points on the same torus.
        epsilon (float): Coarse regularization, 0.01 L by default.
        max_side (int): Downsampling limit per side.
        num_iter (int): Sinkhorn iteration cap.
    Returns:
        KRDistance: Distance and extrapolation data.
    Raises:
        NonConvergenceError: If Sinkhorn reaches its iteration cap.
    """
    if abs(sigma.box_length - density.box_length) > 1e-12 * density.box_length:
        raise InvalidParameterError("density and barycenter use different boxes")
    points, weights = downsample_density(density, max_side)
    targets = np.array(sigma.points)
    target_weights = np.array(sigma.weights)
    # zero weights would put -inf into the log-domain potentials
    occupied = target_weights > 0.0
    result = discrete_kr(
        points,
        weights,
        targets[occupied],
        target_weights[occupied],
        density.box_length,
        epsilon=epsilon,
        num_iter=num_iter,
    )
    logger.info(
        "KR distance %.6g (+/- %.2g) over %d atoms",
        result.distance,
        result.residual,
        len(weights),
    )
    return result
