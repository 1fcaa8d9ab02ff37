"""
Test the exact moment integrals of the Liouville profile.
"""

import math

import pytest

from src.radial.moment_integrals import (
    exponential_polynomial_tail,
    liouville_laplacian,
    moment_integrals,
)
from src.utils.errors import QuadratureToleranceError

NAMES = [
    "int_4exp_minus_2T0",
    "minus_int_lap_T0",
    "minus_int_T0_lap_T0",
    "minus_half_int_T0sq_lap_T0",
    "int_w0_lap_T0_plus_T0_lap_w0",
    "int_ratio_T0sq",
]


def test_tail_of_constant():
    """Integral of exp(-v) over [0, inf) is 1."""
    assert exponential_polynomial_tail(1.0, [1.0], 0.0) == pytest.approx(1.0)


def test_tail_of_linear():
    """Integral of v exp(-2v) over [0, inf) is 1/4."""
    assert exponential_polynomial_tail(2.0, [0.0, 1.0], 0.0) == pytest.approx(0.25)


def test_tail_shifted_start():
    """Integral of v^2 exp(-v) over [1, inf) is 5/e."""
    value = exponential_polynomial_tail(1.0, [0.0, 0.0, 1.0], 1.0)
    assert value == pytest.approx(5.0 / math.e)


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0, 3.0, 100.0])
def test_liouville_laplacian_matches_source(r):
    """-Delta ln(1 + r^2) equals 4 e^(-2 T0) = 4 / (1 + r^2)^2."""
    expected = 4.0 / (1.0 + r * r) ** 2
    assert liouville_laplacian(r) == pytest.approx(expected, rel=1e-10)


def test_laplacian_moment_computed_independently():
    """The mass of -Delta T0 and of 4 e^(-2 T0) agree though their integrands differ."""
    source, laplacian = moment_integrals()[:2]
    assert laplacian.value == pytest.approx(source.value, rel=1e-9)
    assert laplacian.error_estimate <= 1e-10 * laplacian.value


def test_six_moments_in_order():
    """Six moments are returned in a fixed order."""
    assert [moment.name for moment in moment_integrals()] == NAMES


def test_moments_match_closed_forms():
    """Every moment matches its closed form to 1e-8."""
    for moment in moment_integrals():
        detail = f"{moment.name}: {moment.value} vs {moment.target}"
        assert moment.rel_err <= 1e-8, detail


def test_targets():
    """The closed forms are 4 pi four times, 8 pi + 2 pi^3 / 3 and 3 pi / 2."""
    targets = [moment.target for moment in moment_integrals()]
    assert targets[:4] == [pytest.approx(4.0 * math.pi)] * 4
    assert targets[4] == pytest.approx(8.0 * math.pi + 2.0 * math.pi**3 / 3.0)
    assert targets[5] == pytest.approx(1.5 * math.pi)


def test_impossible_tolerance():
    """A tolerance beyond double precision is reported."""
    with pytest.raises(QuadratureToleranceError):
        moment_integrals(tol=1e-20)
