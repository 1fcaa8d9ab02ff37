"""
Periodic sample fields on the flat torus [0, L)^2 with an FFT spectral calculus.

The Laplacian follows the positive convention Delta = -(d_xx + d_yy), so the
operator A = Delta + h is positive definite for h > 0.
"""

from __future__ import annotations

import logging
import operator
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from src.utils.errors import InvalidParameterError, KrylovBreakdownError
from src.utils.utils import check_positive, is_power_of_two

logger = logging.getLogger(__name__)


@lru_cache(maxsize=16)
def spectral_symbol(box_length, n):
    """
    |k|^2 on the FFT grid.
    Args:
        box_length (float): Torus side L.
        n (int): Samples per side.
    Returns:
        np.ndarray: n x n array of kx^2 + ky^2 (read-only).
    """
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=box_length / n)
    symbol = k[:, None] ** 2 + k[None, :] ** 2
    symbol.setflags(write=False)
    return symbol


def torus_displacement(coordinate, center, box_length):
    """
    Minimum-image displacement coordinate - center on a circle of length L.
    Args:
        coordinate (np.ndarray): Coordinates.
        center (float): Reference coordinate.
        box_length (float): Period.
    Returns:
        np.ndarray: Values in [-L/2, L/2).
    """
    return np.mod(coordinate - center + 0.5 * box_length, box_length) - 0.5 * box_length


def torus_distance(a, b, box_length):
    """
    Geodesic distance between points a and b (arrays of shape (..., 2)).
    """
    delta = torus_displacement(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), box_length
    )
    return np.sqrt(np.sum(delta * delta, axis=-1))


def build_weight(box_length, n, weight=None):
    """
    Sample a positive weight h from a small description dict.
    Args:
        box_length (float): Torus side.
        n (int): Samples per side.
        weight (dict): {"kind": "constant", "value": h0} or
            {"kind": "cosine", "mean": m, "amplitude": a, "mode": k}.
    Returns:
        np.ndarray: n x n positive samples.
    Raises:
        InvalidParameterError: For an unknown kind or entries that are not numbers.
    """
    weight = weight or {"kind": "constant", "value": 1.0}
    if not isinstance(weight, dict):
        raise InvalidParameterError(f"weight must be a dict, got {weight!r}")
    kind = weight.get("kind", "constant")
    try:
        if kind == "constant":
            return np.full((n, n), float(weight.get("value", 1.0)))
        if kind == "cosine":
            mean = float(weight.get("mean", 1.0))
            amplitude = float(weight.get("amplitude", 0.0))
            mode = operator.index(weight.get("mode", 1))
            x = np.arange(n) * box_length / n
            wave = 2.0 * np.pi * mode / box_length
            profile = np.cos(wave * x)
            return mean + amplitude * profile[:, None] * profile[None, :]
    except (TypeError, ValueError) as e:
        raise InvalidParameterError(f"malformed {kind} weight {weight!r}: {e}") from e
    raise InvalidParameterError(f"unknown weight kind '{kind}'")


@dataclass(frozen=True, eq=False)
class TorusField:
    """
    Samples of a scalar function on an n x n periodic grid with weight h.
    Attributes:
        box_length (float): Torus side L.
        n (int): Samples per side, a power of two.
        values (np.ndarray): Function samples.
        h_values (np.ndarray): Positive weight samples.
    """

    box_length: float
    n: int
    values: np.ndarray
    h_values: np.ndarray

    def __post_init__(self):
        check_positive(box_length=self.box_length)
        if not is_power_of_two(self.n):
            raise InvalidParameterError(f"n must be a power of two, got {self.n}")
        shape = (self.n, self.n)
        if np.shape(self.values) != shape or np.shape(self.h_values) != shape:
            raise InvalidParameterError(f"values and h_values must have shape {shape}")
        if not np.all(self.h_values > 0.0):
            raise InvalidParameterError("h_values must be positive everywhere")

    @classmethod
    def constant(cls, box_length, n, value=0.0, h=None):
        """Constant field; h is a weight dict, an array, or None for h = 1."""
        h_values = h if isinstance(h, np.ndarray) else build_weight(box_length, n, h)
        return cls(box_length, n, np.full((n, n), float(value)), h_values)

    def with_values(self, values):
        """Same grid and weight, new samples."""
        samples = np.asarray(values, dtype=float)
        return TorusField(self.box_length, self.n, samples, self.h_values)

    @property
    def spacing(self):
        """Grid step L / n."""
        return self.box_length / self.n

    @property
    def cell_area(self):
        """Area weight of one sample."""
        return self.spacing**2

    @property
    def area(self):
        """Torus area L^2."""
        return self.box_length**2

    @property
    def constant_weight(self):
        """True when h does not vary over the grid."""
        return float(np.ptp(self.h_values)) == 0.0

    def coordinates(self):
        """(X, Y) sample coordinates, indexing='ij'."""
        axis = np.arange(self.n) * self.spacing
        return np.meshgrid(axis, axis, indexing="ij")

    def integrate(self, samples=None):
        """Rectangle rule, spectrally accurate for smooth periodic samples."""
        samples = self.values if samples is None else samples
        return float(self.cell_area * np.sum(samples))

    def laplacian(self, samples=None):
        """-(d_xx + d_yy) of the samples."""
        samples = self.values if samples is None else samples
        symbol = spectral_symbol(self.box_length, self.n)
        return np.fft.ifft2(symbol * np.fft.fft2(samples)).real

    def apply_operator(self, samples=None):
        """(Delta + h) applied to the samples."""
        samples = self.values if samples is None else samples
        return self.laplacian(samples) + self.h_values * samples

    def dirichlet(self, samples=None):
        """Integral of |grad u|^2, summed in Fourier space."""
        samples = self.values if samples is None else samples
        symbol = spectral_symbol(self.box_length, self.n)
        coefficients = np.fft.fft2(samples)
        energy = np.sum(symbol * np.abs(coefficients) ** 2)
        return float(self.box_length**2 / self.n**4 * energy)

    def inner_h(self, first, second):
        """<u, v>_h = integral of grad u . grad v + h u v."""
        symbol = spectral_symbol(self.box_length, self.n)
        product = np.fft.fft2(first) * np.conj(np.fft.fft2(second))
        cross = np.sum(symbol * product.real)
        gradient_part = self.box_length**2 / self.n**4 * cross
        return float(gradient_part + self.integrate(self.h_values * first * second))

    def norm_h_squared(self, samples=None):
        """||u||_h^2."""
        samples = self.values if samples is None else samples
        potential = self.integrate(self.h_values * samples * samples)
        return self.dirichlet(samples) + potential

    def parseval_defect(self, samples=None):
        """Relative gap between the two sides of Parseval's identity."""
        samples = self.values if samples is None else samples
        physical = float(np.sum(samples * samples))
        spectral = float(np.sum(np.abs(np.fft.fft2(samples)) ** 2)) / self.n**2
        return abs(physical - spectral) / max(physical, np.finfo(float).tiny)

    def _spectral_inverse(self, samples, shift):
        symbol = spectral_symbol(self.box_length, self.n)
        return np.fft.ifft2(np.fft.fft2(samples) / (symbol + shift)).real

    def solve_operator(self, rhs, rtol=1e-13, maxiter=500):
        """
        Solve (Delta + h) u = rhs.
        Constant h is inverted exactly in Fourier space; otherwise conjugate
        gradients are run with the mean-h spectral inverse as preconditioner.
        Args:
            rhs (np.ndarray): Right-hand side samples.
            rtol (float): Relative residual target of CG.
            maxiter (int): CG iteration cap.
        Returns:
            np.ndarray: Solution samples.
        Raises:
            KrylovBreakdownError: If CG does not converge.
        """
        if self.constant_weight:
            return self._spectral_inverse(rhs, float(self.h_values[0, 0]))

        size = self.n * self.n
        shape = (self.n, self.n)
        mean_h = float(np.mean(self.h_values))

        system = LinearOperator(
            (size, size),
            matvec=lambda flat: self.apply_operator(flat.reshape(shape)).ravel(),
            dtype=float,
        )
        preconditioner = LinearOperator(
            (size, size),
            matvec=lambda flat: self._spectral_inverse(
                flat.reshape(shape), mean_h
            ).ravel(),
            dtype=float,
        )
        guess = self._spectral_inverse(rhs, mean_h).ravel()
        solution, info = cg(
            system,
            np.ravel(rhs),
            x0=guess,
            rtol=rtol,
            atol=0.0,
            maxiter=maxiter,
            M=preconditioner,
        )
        if info != 0:
            logger.error("CG for (Delta + h) stopped with info=%d", info)
            raise KrylovBreakdownError(f"conjugate gradients failed (info={info})")
        return solution.reshape(shape)
