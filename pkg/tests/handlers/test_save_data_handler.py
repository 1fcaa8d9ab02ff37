"""
Test cases for save_data_handler functions.
"""

# pylint: disable=attribute-defined-outside-init

import json
import math
from unittest.mock import patch

import pandas as pd
import pytest

from src.handlers.load_variables_handler import parse_run_config
from src.handlers.save_data_handler import (
    save_data_to_json_file,
    table_file_name,
    write_report,
)
from src.utils.errors import IoFailureError, NaNInReportError


def test_table_file_names():
    """The main table takes the bare stem."""
    assert table_file_name("moments", "main") == "moments.csv"
    assert table_file_name("testfn", "reference") == "testfn.reference.csv"


def test_json_refuses_nan(tmp_path):
    """NaN cannot be written into a sidecar."""
    with pytest.raises(NaNInReportError):
        save_data_to_json_file(tmp_path / "bad.json", {"value": math.nan})


class TestWriteReport:
    """Tests for report tables and sidecars."""

    def setup_method(self):
        """A small table and its configuration."""
        self.frame = pd.DataFrame({"gamma": [6.0, 8.0], "excess": [0.1, 1.0 / 3.0]})
        self.config = parse_run_config({"seed": 2}, "bubble")

    def test_writes_table_sidecar_and_recipe(self, tmp_path):
        """CSV, JSON and plot recipe are written."""
        written = write_report(
            self.frame,
            tmp_path,
            "bubble",
            config=self.config,
            summary={"rate": 2.0},
            plot_recipe="x: gamma",
        )
        assert [path.rsplit("/", 1)[-1] for path in map(str, written)] == [
            "bubble.csv",
            "bubble.json",
            "bubble.plot.txt",
        ]
        sidecar = json.loads((tmp_path / "bubble.json").read_text(encoding="utf-8"))
        assert sidecar["tool"] == "mtlab"
        assert sidecar["command"] == "bubble"
        assert sidecar["config"]["seed"] == 2
        assert sidecar["tables"]["main"]["rows"] == 2
        assert sidecar["summary"] == {"rate": 2.0}
        assert "error" not in sidecar

    def test_floats_round_trip_exactly(self, tmp_path):
        """17 significant digits reproduce every double."""
        write_report(self.frame, tmp_path, "bubble", config=self.config)
        reread = pd.read_csv(tmp_path / "bubble.csv", float_precision="round_trip")
        assert reread["excess"][1] == 1.0 / 3.0

    def test_rerun_is_byte_identical(self, tmp_path):
        """Writing the same report twice gives the same bytes."""
        write_report(self.frame, tmp_path / "a", "bubble", config=self.config)
        write_report(self.frame, tmp_path / "b", "bubble", config=self.config)
        for name in ("bubble.csv", "bubble.json"):
            first = (tmp_path / "a" / name).read_bytes()
            assert first == (tmp_path / "b" / name).read_bytes()

    def test_several_tables(self, tmp_path):
        """Secondary tables get their own suffix."""
        tables = {"main": self.frame, "reference": self.frame.head(1)}
        write_report(tables, tmp_path, "testfn", command="testfn")
        assert (tmp_path / "testfn.reference.csv").exists()
        sidecar = json.loads((tmp_path / "testfn.json").read_text(encoding="utf-8"))
        assert sidecar["tables"]["reference"]["file"] == "testfn.reference.csv"

    def test_nan_table_refused(self, tmp_path):
        """A NaN cell stops the report before anything is written."""
        frame = pd.DataFrame({"value": [1.0, math.nan]})
        with pytest.raises(NaNInReportError):
            write_report(frame, tmp_path / "out", "bad", command="moments")
        assert not (tmp_path / "out").exists()

    def test_error_entry(self, tmp_path):
        """Failed runs carry a structured error entry."""
        error = {"type": "MaxIterationsError", "message": "m"}
        write_report({}, tmp_path, "solve", command="solve", error=error)
        sidecar = json.loads((tmp_path / "solve.json").read_text(encoding="utf-8"))
        assert sidecar["error"]["type"] == "MaxIterationsError"
        assert sidecar["tables"] == {}

    def test_unwritable_directory(self, tmp_path):
        """OS errors surface as IoFailureError."""
        with patch(
            "src.handlers.save_data_handler.os.makedirs",
            side_effect=PermissionError("denied"),
        ), patch("builtins.print"):
            with pytest.raises(IoFailureError):
                write_report(
                    self.frame, tmp_path / "locked", "bubble", command="bubble"
                )
