"""Timing harness for the two history-convolution strategies."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import InvalidConfigError
from .models import ConvolutionMethod
from .quadrupole_dynamics import ConvolutionAccumulator, memory_convolution
from .stochastic import derive_stream
from .trajectory import TimeGrid

logger = logging.getLogger(__name__)

DEFAULT_STEPS = (1_000, 10_000, 100_000)
DEFAULT_PROBES = 50
BENCH_DT = 1e-3
BENCH_OMEGA = 1.0


@dataclass(slots=True, frozen=True)
class BenchRow:
    steps: int
    incremental_per_step: float
    naive_per_call: float
    speedup: float
    max_relative_difference: float


def smooth_signal(n_points: int, dt: float, seed: int = 0) -> np.ndarray:
    """Random superposition of a few slow sinusoids, reproducible from ``seed``."""

    stream = derive_stream(seed, 0)
    amplitudes = stream.normal(size=4)
    frequencies = stream.uniform(0.1, 2.0, size=4)
    phases = stream.uniform(0.0, 2.0 * math.pi, size=4)
    times = np.arange(n_points) * dt
    return np.sin(np.multiply.outer(times, frequencies) + phases) @ amplitudes


def bench_case(steps: int, probes: int = DEFAULT_PROBES, *, seed: int = 0) -> BenchRow:
    if steps < 1 or probes < 1:
        raise InvalidConfigError("bench steps and probes must be >= 1")
    grid = TimeGrid(0.0, BENCH_DT, steps)
    signal = smooth_signal(grid.n_points, grid.dt, seed)
    probe_points = np.unique(np.linspace(1, grid.n_points, min(probes, grid.n_points)).astype(int))
    probe_set = set(int(point) for point in probe_points)

    accumulator = ConvolutionAccumulator([BENCH_OMEGA])
    incremental: dict[int, complex] = {}
    started = time.perf_counter()
    for count in range(1, grid.n_points + 1):
        value = memory_convolution(signal[:count], BENCH_OMEGA, ConvolutionMethod.INCREMENTAL, grid, accumulator)
        if count in probe_set:
            incremental[count] = value
    incremental_per_step = (time.perf_counter() - started) / grid.n_points

    # Per-call cost at the full history length.
    started = time.perf_counter()
    for _ in range(probes):
        memory_convolution(signal, BENCH_OMEGA, ConvolutionMethod.NAIVE, grid)
    naive_per_call = (time.perf_counter() - started) / probes

    naive = np.array([memory_convolution(signal[:count], BENCH_OMEGA, ConvolutionMethod.NAIVE, grid) for count in probe_points])
    fast = np.array([incremental[int(count)] for count in probe_points])
    scale = max(float(np.max(np.abs(naive))), np.finfo(float).tiny)
    difference = float(np.max(np.abs(naive - fast))) / scale

    row = BenchRow(
        steps=steps,
        incremental_per_step=incremental_per_step,
        naive_per_call=naive_per_call,
        speedup=naive_per_call / incremental_per_step if incremental_per_step > 0 else math.inf,
        max_relative_difference=difference,
    )
    logger.info(
        "bench steps=%s incremental=%.3gs/step naive=%.3gs/call speedup=%.1f diff=%.2g",
        steps,
        row.incremental_per_step,
        row.naive_per_call,
        row.speedup,
        row.max_relative_difference,
    )
    return row


def run_benchmark(steps: Sequence[int] = DEFAULT_STEPS, probes: int = DEFAULT_PROBES, *, seed: int = 0) -> list[BenchRow]:
    return [bench_case(int(count), probes, seed=seed) for count in steps]


def cost_slopes(rows: Sequence[BenchRow]) -> dict[str, float]:
    """Log–log slopes of cost against step count: ~0 for incremental, ~1 for naive."""

    if len(rows) < 2:
        return {"incremental": math.nan, "naive": math.nan}
    steps = np.log([row.steps for row in rows])
    return {
        "incremental": float(np.polyfit(steps, np.log([row.incremental_per_step for row in rows]), 1)[0]),
        "naive": float(np.polyfit(steps, np.log([row.naive_per_call for row in rows]), 1)[0]),
    }


def bench_frame(rows: Sequence[BenchRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in rows])


__all__ = [
    "DEFAULT_STEPS",
    "DEFAULT_PROBES",
    "BenchRow",
    "smooth_signal",
    "bench_case",
    "run_benchmark",
    "cost_slopes",
    "bench_frame",
]
