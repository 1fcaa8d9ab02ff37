"""
Save data handler module.
Writes report tables as CSV, a JSON sidecar echoing the configuration, and a
plain-text plot recipe.
"""

import json
import logging
import os

import numpy as np
import pandas as pd

from src.utils.errors import IoFailureError, NaNInReportError
from src.utils.utils import scan_for_nan

logger = logging.getLogger(__name__)
logger.info("Save data started")

TOOL_NAME = "mtlab"
TOOL_VERSION = "1.0.0"
MAIN_TABLE = "main"


def _to_builtin(value):
    """json.dump fallback for numpy scalars and arrays."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def table_file_name(stem, name):
    """<stem>.csv for the main table, <stem>.<name>.csv for the others."""
    return f"{stem}.csv" if name == MAIN_TABLE else f"{stem}.{name}.csv"


def save_data_to_json_file(file_path, data):
    """
    Save JSON data with sorted keys and no NaN values.
    Args:
        file_path (str): Path to the JSON file.
        data (dict): Data to save.
    Raises:
        NaNInReportError: If data holds NaN or infinity.
    """
    try:
        text = json.dumps(
            data,
            indent=2,
            sort_keys=True,
            ensure_ascii=False,
            allow_nan=False,
            default=_to_builtin,
        )
    except ValueError as e:
        raise NaNInReportError(
            f"sidecar for {file_path} holds a non-finite value"
        ) from e
    with open(file_path, "w", encoding="utf-8", newline="\n") as file:
        file.write(text + "\n")


def write_report(
    results,
    output_dir,
    stem,
    config=None,
    command=None,
    summary=None,
    plot_recipe=None,
    error=None,
):
    """
    Write report tables, the JSON sidecar and an optional plot recipe.
    Args:
        results: A pandas.DataFrame, or a mapping of table name to DataFrame.
        output_dir (str): Target directory, created when missing.
        stem (str): Common file name stem.
        config (RunConfig): Configuration echoed into the sidecar.
        command (str): Command name when no config is available.
        summary (dict): Scalar results stored in the sidecar.
        plot_recipe (str): Plain-text plotting instructions.
        error (dict): Structured error entry of a failed run.
    Returns:
        list: Paths of the written files.
    Raises:
        NaNInReportError: If any table or summary value is NaN.
        IoFailureError: If a file cannot be written.
    """
    if isinstance(results, pd.DataFrame):
        tables = {MAIN_TABLE: results}
    else:
        tables = dict(results or {})
    scan_for_nan(tables)

    sidecar = {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": config.command if config is not None else command,
        "config": config.to_document() if config is not None else {},
        "tables": {
            name: {
                "file": table_file_name(stem, name),
                "rows": int(len(frame)),
                "columns": [str(column) for column in frame.columns],
            }
            for name, frame in tables.items()
        },
        "summary": summary or {},
    }
    if error is not None:
        sidecar["error"] = error

    written = []
    try:
        os.makedirs(output_dir, exist_ok=True)
        for name, frame in sorted(tables.items()):
            path = os.path.join(output_dir, table_file_name(stem, name))
            frame.to_csv(
                path,
                index=False,
                float_format="%.17g",
                lineterminator="\n",
                encoding="utf-8",
            )
            written.append(path)
        sidecar_path = os.path.join(output_dir, f"{stem}.json")
        save_data_to_json_file(sidecar_path, sidecar)
        written.append(sidecar_path)
        if plot_recipe:
            recipe_path = os.path.join(output_dir, f"{stem}.plot.txt")
            with open(recipe_path, "w", encoding="utf-8", newline="\n") as file:
                file.write(plot_recipe.rstrip("\n") + "\n")
            written.append(recipe_path)
    except OSError as e:
        logger.error(" Error writing report %s: %s", stem, e)
        print("❌ Error writing report: ", e)
        raise IoFailureError(
            f"cannot write report '{stem}' to {output_dir}: {e}"
        ) from e

    logger.info("✅ Report %s written to %s", stem, output_dir)
    return written
