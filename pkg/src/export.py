"""File writers for run outputs: CSV series, JSON summaries, SVG plots and the config echo."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .config import ECHO_NAME, SimConfig, render_config  # noqa: E402
from .errors import GridError  # noqa: E402
from .observables import TimeSeries  # noqa: E402

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = Path(__file__).resolve().parent.parent / "runs"
FLOAT_FORMAT = "%.17g"


def series_frame(series: Sequence[TimeSeries]) -> pd.DataFrame:
    """One frame with ``t`` first, then each series and its ``*_stderr`` column."""

    if not series:
        raise GridError("no series to tabulate")
    grid = series[0].grid
    frame = pd.DataFrame({"t": grid.times()})
    for item in series:
        if item.grid != grid:
            raise GridError(f"series {item.name!r} is on a different grid")
        frame[item.name] = item.values
        if item.stderr is not None:
            frame[f"{item.name}_stderr"] = item.stderr
    return frame


class OutputSession:
    """Writes into one directory and remembers every file it created.

    ``discard`` removes exactly those files (and the directory if this
    session created it and it is left empty).
    """

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)
        self._created_dir = not self.directory.exists()
        self.directory.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def _target(self, name: str) -> Path:
        path = self.directory / name
        if path not in self.files:
            self.files.append(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._target(name)
        path.write_text(text, encoding="utf-8")
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._target(name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    def write_series(self, name: str, series: Sequence[TimeSeries]) -> Path:
        return self.write_frame(name, series_frame(series))

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def write_echo(self, config: SimConfig) -> Path:
        return self.write_text(ECHO_NAME, render_config(config))

    def write_plot(
        self,
        name: str,
        series: Iterable[TimeSeries],
        *,
        title: str,
        ylabel: str,
        loglog: bool = False,
    ) -> Path:
        path = self._target(name)
        save_line_plot(path, list(series), title=title, ylabel=ylabel, loglog=loglog)
        return path

    def discard(self) -> None:
        for path in reversed(self.files):
            try:
                path.unlink()
            except FileNotFoundError:
                continue
            except OSError as exc:
                logger.warning("Could not remove partial output %s: %s", path, exc)
        if self.files:
            logger.warning("Removed %s partial output file(s) from %s", len(self.files), self.directory)
        self.files.clear()
        if self._created_dir:
            try:
                self.directory.rmdir()
            except OSError:
                pass


def save_line_plot(
    path: Path,
    series: Sequence[TimeSeries],
    *,
    title: str,
    ylabel: str,
    loglog: bool = False,
) -> None:
    """Static SVG of one or more series against elapsed time."""

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        for item in series:
            elapsed = item.grid.elapsed()
            values = item.values
            if loglog:
                keep = (elapsed > 0) & (values > 0)
                elapsed, values = elapsed[keep], values[keep]
            ax.plot(elapsed, values, label=item.name, linewidth=1.2)
            if item.stderr is not None and not loglog:
                ax.fill_between(elapsed, values - item.stderr, values + item.stderr, alpha=0.2)
        if loglog:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("t − t0")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)


def stderr_units(difference: np.ndarray, stderr: np.ndarray) -> np.ndarray:
    """|difference| / stderr, with 0/0 reported as 0 and x/0 as inf."""

    difference = np.abs(np.asarray(difference, dtype=float))
    stderr = np.asarray(stderr, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(stderr > 0, difference / np.where(stderr > 0, stderr, 1.0), np.where(difference > 0, np.inf, 0.0))
    return ratio


__all__ = [
    "DEFAULT_OUTPUT_DIR",
    "FLOAT_FORMAT",
    "series_frame",
    "OutputSession",
    "save_line_plot",
    "stderr_units",
]
