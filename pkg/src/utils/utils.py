"""
Utility functions shared by the numerical modules and the command line runner.
"""

import logging
import math
from multiprocessing import Pool

import numpy as np
import pandas as pd

from src.utils.errors import InvalidParameterError, NaNInReportError

logger = logging.getLogger(__name__)


def check_positive(**values):
    """
    Validate that every keyword value is a positive finite number.
    Raises:
        InvalidParameterError: Naming the first offending argument.
    """
    for name, value in values.items():
        if value is None or not value > 0 or not math.isfinite(value):
            raise InvalidParameterError(
                f"{name} must be positive and finite, got {value}"
            )


def check_exponent(p, low=1.0, high=2.0, open_low=False):
    """
    Validate the exponent p against [low, high] or (low, high].
    Raises:
        InvalidParameterError: If p is out of range.
    """
    inside_low = low < p if open_low else low <= p
    if not inside_low or p > high:
        bracket = "(" if open_low else "["
        raise InvalidParameterError(f"p must lie in {bracket}{low}, {high}], got {p}")


def is_power_of_two(n):
    """Return True for n = 1, 2, 4, 8, ..."""
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def scan_for_nan(tables):
    """
    Refuse tables holding NaN values.
    Args:
        tables (dict): Name -> pandas.DataFrame.
    Raises:
        NaNInReportError: Naming the table and columns with NaN.
    """
    for name, frame in tables.items():
        numeric = frame.select_dtypes(include=[np.number])
        bad = [column for column in numeric.columns if numeric[column].isna().any()]
        if bad:
            raise NaNInReportError(f"table '{name}' has NaN in columns {bad}")


def run_in_pool(worker, tasks, processes):
    """
    Map a picklable worker over tasks, in-process when one worker suffices.
    Args:
        worker (callable): Top-level function of one task.
        tasks (list): Task arguments.
        processes (int): Worker cap.
    Returns:
        list: Results in task order.
    """
    processes = max(1, min(processes, len(tasks)))
    if processes == 1:
        return [worker(task) for task in tasks]
    logger.info("Dispatching %d tasks to %d workers", len(tasks), processes)
    with Pool(processes=processes) as pool:
        return pool.map(worker, tasks)


def records_to_frame(records, sort_by=None):
    """
    Build a DataFrame from a list of dict records with a stable row order.
    Args:
        records (list): Row dictionaries sharing the same keys.
        sort_by (list): Columns giving the deterministic sort key.
    Returns:
        pandas.DataFrame: Frame with columns in first-record order.
    """
    frame = pd.DataFrame.from_records(records)
    if sort_by and not frame.empty:
        frame = frame.sort_values(sort_by, kind="mergesort").reset_index(drop=True)
    return frame
