"""
Load configuration documents and typed variables from JSON files.
"""

import copy
import json
import logging
import os
from dataclasses import dataclass

from src.utils.errors import ConfigParseError, UnknownCommandError

logger = logging.getLogger(__name__)
logger.info("Load variables started")

DEFAULT_CONFIG_PATH = "./config/mtlab.json"


def load_json(file_path=DEFAULT_CONFIG_PATH, strict=False):
    """
    Load a configuration document from a JSON file.
    Args:
        file_path (str): Path to the JSON file.
        strict (bool): Raise instead of falling back to an empty document.
    Returns:
        dict: The parsed document, or {} when lenient and the file is unusable.
    Raises:
        ConfigParseError: In strict mode, for a missing file, invalid JSON,
            or a top level that is not an object.
    """
    if not os.path.exists(file_path):
        if strict:
            raise ConfigParseError(f"config file {file_path} not found")
        logger.error("File %s not found. Using default values.", file_path)
        print("❌ File ", file_path, " not found. Using default values.")
        return {}

    try:
        with open(file_path, "r", encoding="utf-8") as file:
            variables = json.load(file)
    except json.JSONDecodeError as e:
        if strict:
            raise ConfigParseError(
                f"invalid JSON in {file_path}: {e.msg}", line=e.lineno, column=e.colno
            ) from e
        logger.error(" Invalid JSON in file %s. Using default values.", file_path)
        print("❌ Invalid JSON in file ", file_path, ". Using default values.")
        return {}

    if not isinstance(variables, dict):
        if strict:
            raise ConfigParseError(f"top level of {file_path} must be an object")
        logger.error(" Top level of %s is not an object.", file_path)
        return {}
    return variables


def get_thread_cap(default=None):
    """
    Read the worker cap from the MTLAB_THREADS environment variable.
    Args:
        default (int): Used when the variable is unset or invalid; cpu count if None.
    Returns:
        int: A positive worker count.
    """
    fallback = default or os.cpu_count() or 1
    raw = os.environ.get("MTLAB_THREADS")
    if raw is None:
        return fallback
    try:
        value = int(raw)
    except ValueError:
        logger.warning("MTLAB_THREADS=%s is not an integer, using %d", raw, fallback)
        return fallback
    return max(1, value)


COMMANDS = (
    "bubble",
    "moments",
    "w1",
    "energy-expansion",
    "testfn",
    "solve",
    "continue",
    "diagnose",
)

UNIFORM_WEIGHT = {"kind": "constant", "value": 1.0}

COMMAND_DEFAULTS = {
    "bubble": {
        "p": 2.0,
        "gammas": [6.0, 8.0, 10.0, 12.0],
        "h0": 1.0,
        "s_max": 10.0,
        "rtol": 1e-10,
        "atol": 1e-14,
    },
    "moments": {"tol": 1e-10, "s_tail": 1e4},
    "w1": {"ps": [1.25, 1.5, 1.75, 2.0], "s_max": 1e6, "rtol": 1e-10, "atol": 1e-12},
    "energy-expansion": {
        "p": 2.0,
        "gammas": [12.0, 14.0, 16.0, 18.0, 20.0, 24.0],
        "extra_terms": 2,
        "h0": 1.0,
        "radius_rule": "neck",
        "rtol": 1e-10,
        "atol": 1e-14,
    },
    "testfn": {
        "p": 1.5,
        "gammas": [2.5, 3.0, 3.5],
        "box": 2.0,
        "n": 512,
        "points": [[0.5, 0.5], [1.5, 1.5]],
        "weights": [0.5, 0.5],
        "beta_over_pi": 9.0,
        "kr": True,
        "reference_gammas": [50.0, 100.0, 200.0],
    },
    "solve": {
        "p": 1.5,
        "beta_over_pi": 2.0,
        "n": 64,
        "box": 1.0,
        "weight": UNIFORM_WEIGHT,
        "init_value": 1.0,
        "noise": 0.0,
        "tol_min": 1e-8,
        "tol_newton": 1e-12,
    },
    "continue": {
        "p": 1.5,
        "parameter": "beta",
        "beta_start_over_pi": 2.0,
        "beta_end_over_pi": 3.9,
        "p_end": 2.0,
        "steps": 19,
        "n": 64,
        "box": 1.0,
        "weight": UNIFORM_WEIGHT,
        "ceiling": 8.0,
        "mu_floor_cells": 2.0,
        "tol": 1e-10,
    },
    "diagnose": {
        "source": "planted",
        "p": 1.5,
        "gamma": 6.0,
        "mu": 0.05,
        "n": 256,
        "box": 6.283185307179586,
        "beta_over_pi": 2.0,
        "weight": UNIFORM_WEIGHT,
    },
}

SORTED_LISTS = ("gammas", "ps", "reference_gammas")
TOLERANCES = ("tol", "rtol", "atol", "tol_min", "tol_newton")
CHOICES = {
    "radius_rule": ("neck", "sqrt_gamma"),
    "parameter": ("beta", "p"),
    "source": ("planted", "solve"),
}
WEIGHT_FIELDS = {
    "constant": ("value",),
    "cosine": ("mean", "amplitude", "mode"),
}


@dataclass(frozen=True)
class RunConfig:
    """
    Validated parameters of one command run.
    Attributes:
        command (str): Subcommand name.
        params (dict): Command block with defaults filled in.
        seed (int): Seed of every random draw.
        output_dir (str): Report directory.
        logs_dir (str): Log directory.
    """

    command: str
    params: dict
    seed: int = 0
    output_dir: str = "results"
    logs_dir: str = "logs"

    def get(self, key, default=None):
        """Parameter lookup with a default."""
        return self.params.get(key, default)

    def to_document(self):
        """Configuration document that parses back into this RunConfig."""
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "logs_dir": self.logs_dir,
            self.command: copy.deepcopy(self.params),
        }


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_weight(value, field):
    kind = value.get("kind", "constant")
    if kind not in WEIGHT_FIELDS:
        raise ConfigParseError(
            f"kind must be one of {tuple(WEIGHT_FIELDS)}, got {kind!r}", field=field
        )
    for key, entry in value.items():
        if key == "kind":
            continue
        where = f"{field}.{key}"
        if key not in WEIGHT_FIELDS[kind]:
            raise ConfigParseError(f"unknown entry for a {kind} weight", field=where)
        if key == "mode":
            if not isinstance(entry, int) or isinstance(entry, bool) or entry < 1:
                raise ConfigParseError(
                    f"expected a positive integer, got {entry!r}", field=where
                )
        elif not _is_number(entry):
            raise ConfigParseError(f"expected a number, got {entry!r}", field=where)
    if kind == "constant":
        lowest = value.get("value", 1.0)
    else:
        lowest = value.get("mean", 1.0) - abs(value.get("amplitude", 0.0))
    if not lowest > 0:
        raise ConfigParseError("weight must stay positive", field=field)


def _check_points(value, field):
    for index, point in enumerate(value):
        if (
            not isinstance(point, list)
            or len(point) != 2
            or not all(_is_number(c) for c in point)
        ):
            raise ConfigParseError(
                f"expected an [x, y] pair of numbers, got {point!r}",
                field=f"{field}[{index}]",
            )


def _check_types(value, default, field):
    if isinstance(default, int) and not isinstance(default, bool):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigParseError(f"expected an integer, got {value!r}", field=field)
    if isinstance(default, (list, dict)) and not isinstance(value, type(default)):
        raise ConfigParseError(
            f"expected {type(default).__name__}, got {value!r}", field=field
        )
    if _is_number(default) and not _is_number(value):
        raise ConfigParseError(f"expected a number, got {value!r}", field=field)
    if isinstance(default, bool) and not isinstance(value, bool):
        raise ConfigParseError(f"expected true or false, got {value!r}", field=field)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigParseError(f"expected a string, got {value!r}", field=field)


def _check_field(command, key, value, default):
    field = f"{command}.{key}"
    _check_types(value, default, field)
    if key in TOLERANCES and not value > 0:
        raise ConfigParseError(f"tolerance must be positive, got {value}", field=field)
    if key == "n" and (value < 1 or value & (value - 1)):
        raise ConfigParseError(
            f"grid size must be a power of two, got {value}", field=field
        )
    if key == "extra_terms" and value < 0:
        raise ConfigParseError(f"must be >= 0, got {value}", field=field)
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigParseError(
            f"must be one of {CHOICES[key]}, got {value!r}", field=field
        )
    if key == "weight":
        _check_weight(value, field)
    if key == "points":
        _check_points(value, field)
    if key == "weights" and not all(_is_number(w) and w >= 0 for w in value):
        raise ConfigParseError("expected a list of non-negative numbers", field=field)
    if key in SORTED_LISTS:
        if not value or not all(_is_number(item) for item in value):
            raise ConfigParseError("expected a non-empty list of numbers", field=field)
        if any(later <= earlier for earlier, later in zip(value, value[1:])):
            raise ConfigParseError(
                "list must be sorted ascending without repeats", field=field
            )


def parse_run_config(document, command, overrides=None):
    """
    Validate a command block into a RunConfig.

    A report sidecar is accepted as the document: its "config" entry is used.
    Nested fields are checked too: weight dicts entry by entry and test
    function points as [x, y] pairs aligned with their weights.
    Args:
        document (dict): Parsed configuration document.
        command (str): Subcommand name.
        overrides (dict): Field values taking precedence over the document.
    Returns:
        RunConfig: The validated configuration.
    Raises:
        UnknownCommandError: If command is not a known subcommand.
        ConfigParseError: Naming the first invalid field.
    """
    if command not in COMMANDS:
        raise UnknownCommandError(f"unknown command '{command}'")
    if "tool" in document and isinstance(document.get("config"), dict):
        document = document["config"]

    block = document.get(command, {})
    if not isinstance(block, dict):
        raise ConfigParseError("command block must be an object", field=command)
    params = copy.deepcopy(COMMAND_DEFAULTS[command])
    for key, value in {**block, **(overrides or {})}.items():
        if key not in params:
            raise ConfigParseError("unknown field", field=f"{command}.{key}")
        _check_field(command, key, value, params[key])
        if isinstance(params[key], float) and _is_number(value):
            value = float(value)
        params[key] = value
    if "points" in params and len(params["points"]) != len(params["weights"]):
        raise ConfigParseError(
            f"{len(params['weights'])} weights for {len(params['points'])} points",
            field=f"{command}.weights",
        )

    seed = document.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigParseError(f"seed must be an integer, got {seed!r}", field="seed")
    return RunConfig(
        command=command,
        params=params,
        seed=seed,
        output_dir=str(document.get("output_dir", "results")),
        logs_dir=str(document.get("logs_dir", "logs")),
    )
