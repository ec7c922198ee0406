import math

import numpy as np
import pandas as pd
import pytest

from src.config import ECHO_NAME, SimConfig, parse_config
from src.errors import GridError
from src.export import OutputSession, series_frame, stderr_units
from src.observables import TimeSeries
from src.trajectory import TimeGrid


def test_series_frame_columns_and_grid_check():
    grid = TimeGrid(0.0, 0.5, 3)
    frame = series_frame([TimeSeries(grid, np.arange(4.0), np.ones(4), "msd"), TimeSeries(grid, np.zeros(4), None, "vacf")])
    assert list(frame.columns) == ["t", "msd", "msd_stderr", "vacf"]
    with pytest.raises(GridError):
        series_frame([TimeSeries(grid, np.zeros(4)), TimeSeries(TimeGrid(0.0, 0.5, 4), np.zeros(5))])


def test_session_writes_full_precision_and_discards(tmp_path):
    target = tmp_path / "run"
    session = OutputSession(target)
    grid = TimeGrid(0.0, 0.1, 2)
    session.write_series("series.csv", [TimeSeries(grid, [0.0, 1.0 / 3.0, math.pi], name="x")])
    session.write_echo(SimConfig())
    session.write_json("summary.json", {"value": 1})
    session.write_plot("x.svg", [TimeSeries(grid, [0.0, 1.0, 4.0], name="x")], title="x", ylabel="x", loglog=True)

    assert pd.read_csv(target / "series.csv", float_precision="round_trip")["x"].iloc[2] == math.pi
    assert parse_config(target / ECHO_NAME) == SimConfig()
    assert (target / "x.svg").read_text().lstrip().startswith("<?xml")

    session.discard()
    assert not target.exists()


def test_discard_keeps_foreign_files(tmp_path):
    (tmp_path / "notes.txt").write_text("keep")
    session = OutputSession(tmp_path)
    session.write_text("partial.txt", "drop")
    session.discard()
    assert (tmp_path / "notes.txt").exists()
    assert not (tmp_path / "partial.txt").exists()


def test_stderr_units_handles_zero_error():
    ratio = stderr_units([1.0, 0.0, 2.0], [0.5, 0.0, 0.0])
    assert ratio.tolist() == [2.0, 0.0, math.inf]
