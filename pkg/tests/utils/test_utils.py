"""
Test utility functions in the src.utils.utils module.
"""

import math

import numpy as np
import pandas as pd
import pytest

from src.utils.errors import InvalidParameterError, NaNInReportError
from src.utils.utils import (
    check_exponent,
    check_positive,
    is_power_of_two,
    records_to_frame,
    run_in_pool,
    scan_for_nan,
)


def test_check_positive():
    """
    Test that check_positive accepts positive numbers and names the first bad one.
    """
    check_positive(a=1.0, b=1e-300)
    with pytest.raises(InvalidParameterError, match="beta"):
        check_positive(gamma=2.0, beta=0.0)
    with pytest.raises(InvalidParameterError):
        check_positive(mu=math.inf)
    with pytest.raises(InvalidParameterError):
        check_positive(mu=None)


def test_check_exponent():
    """
    Test closed and half-open exponent ranges.
    """
    check_exponent(1.0)
    check_exponent(2.0)
    with pytest.raises(InvalidParameterError):
        check_exponent(1.0, open_low=True)
    with pytest.raises(InvalidParameterError):
        check_exponent(2.01)


def test_is_power_of_two():
    """
    Test power-of-two detection for Python and numpy integers.
    """
    assert is_power_of_two(1)
    assert is_power_of_two(np.int64(256))
    assert not is_power_of_two(0)
    assert not is_power_of_two(96)
    assert not is_power_of_two(64.0)


def test_scan_for_nan():
    """
    Test that NaN in a numeric column is reported with the table name.
    """
    scan_for_nan({"main": pd.DataFrame({"a": [1.0, 2.0], "name": ["x", None]})})
    with pytest.raises(NaNInReportError, match="reference"):
        scan_for_nan({"reference": pd.DataFrame({"a": [1.0, math.nan]})})


def test_run_in_pool_preserves_order():
    """
    Test that results keep task order in-process and in a worker pool.
    """
    tasks = [-3, 1, -2]
    assert run_in_pool(abs, tasks, 1) == [3, 1, 2]
    assert run_in_pool(abs, tasks, 2) == [3, 1, 2]


def test_records_to_frame_sorted():
    """
    Test that records are sorted stably by the given key.
    """
    records = [{"p": 2.0, "v": 1}, {"p": 1.5, "v": 2}, {"p": 2.0, "v": 3}]
    frame = records_to_frame(records, sort_by=["p"])
    assert list(frame["v"]) == [2, 1, 3]
    assert records_to_frame([]).empty
