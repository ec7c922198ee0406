"""Reproducible batches of trajectories and their aggregated statistics."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from .config import SimConfig, config_dict
from .dipole_dynamics import integrate_dipole
from .errors import EmptyInputError, EnsembleDivergedError, InvalidConfigError, TrajectoryDivergedError
from .models import Approximation, Formulation, ModeLattice, SystemState
from .observables import (
    KernelEquation,
    TimeSeries,
    ensemble_mean,
    memory_kernel,
    memory_metric,
    msd_direct,
    msd_from_vacf,
    msd_from_velocities,
    vacf,
    vacf_table,
)
from .quadrupole_dynamics import integrate_quadrupole_local, integrate_quadrupole_reduced
from .stochastic import NoisePath, derive_stream, ou_noise_path, sample_initial_modes
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

THREADS_ENV = "NMGLE_THREADS"
# Share of diverged trajectories tolerated before a run fails.
DIVERGENCE_TOLERANCE = 0.10
# Largest grid for which the full two-time VACF table is materialized.
VACF_TABLE_LIMIT = 4001


@dataclass(slots=True, frozen=True, eq=False)
class TrajectoryOutcome:
    index: int
    trajectory: Optional[Trajectory] = None
    diverged_step: Optional[int] = None

    @property
    def diverged(self) -> bool:
        return self.trajectory is None


@dataclass(slots=True, eq=False)
class EnsembleResult:
    config: SimConfig
    series: Dict[str, TimeSeries]
    memory_metric: float
    n_completed: int
    diverged: tuple[int, ...] = ()
    wall_seconds: float = 0.0
    workers: int = 1

    def to_dict(self, *, include_timing: bool = True) -> Dict[str, Any]:
        grid = self.config.grid
        payload: Dict[str, Any] = {
            "config": config_dict(self.config),
            "t": grid.times().tolist(),
            "series": {
                name: {
                    "values": series.values.tolist(),
                    "stderr": None if series.stderr is None else series.stderr.tolist(),
                }
                for name, series in self.series.items()
            },
            "memory_metric": self.memory_metric,
            "memory_metric_note": "heuristic score defined by this tool, not a published measure",
            "n_completed": self.n_completed,
            "diverged": list(self.diverged),
        }
        if include_timing:
            payload["wall_seconds"] = self.wall_seconds
            payload["workers"] = self.workers
        return payload

    def canonical_json(self) -> str:
        """Serialization without timing or worker count; equal configs give equal text."""

        return json.dumps(self.to_dict(include_timing=False), sort_keys=True)


@dataclass(slots=True, frozen=True)
class EnsembleSummary:
    final_msd: float
    exponent: Optional[float]
    memory_metric: float
    energy_drift: float
    photon_drift: float
    n_completed: int
    n_diverged: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "final_msd": self.final_msd,
            "exponent": self.exponent,
            "memory_metric": self.memory_metric,
            "memory_metric_note": "heuristic score defined by this tool, not a published measure",
            "energy_drift": self.energy_drift,
            "photon_drift": self.photon_drift,
            "n_completed": self.n_completed,
            "n_diverged": self.n_diverged,
        }


def resolve_workers(value: str | int | None = None) -> int:
    """Worker count from ``value`` or ``NMGLE_THREADS``; 0 or unset means one per CPU."""

    raw = os.environ.get(THREADS_ENV) if value is None else value
    if raw is None or (isinstance(raw, str) and not raw.strip()):
        count = 0
    else:
        try:
            count = int(raw)
        except (TypeError, ValueError) as exc:
            raise InvalidConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if count < 0:
        raise InvalidConfigError(f"{THREADS_ENV} must be >= 0, got {count}")
    return count or (os.cpu_count() or 1)


def integrate_config(
    config: SimConfig,
    lattice: ModeLattice,
    alphas0: np.ndarray,
    noise: NoisePath | None = None,
    *,
    formulation: Formulation | None = None,
    record_amplitudes: bool = False,
) -> Trajectory:
    """Integrate one trajectory from α(0) with the approximation and formulation of ``config``."""

    formulation = formulation or config.formulation
    if config.approx is Approximation.DIPOLE:
        state0 = SystemState.initial(lattice, config.x0, config.p0, alphas0, t=config.grid.t0)
        return integrate_dipole(state0, lattice, config.particle, config.grid, noise, record_amplitudes=record_amplitudes)
    if formulation is Formulation.REDUCED:
        return integrate_quadrupole_reduced(
            config.x0,
            config.p0,
            alphas0,
            lattice,
            config.particle,
            config.grid,
            config.convolution,
            noise,
            record_amplitudes=record_amplitudes,
        )
    state0 = SystemState.initial(lattice, config.x0, config.p0, alphas0, t=config.grid.t0)
    return integrate_quadrupole_local(
        state0, lattice, config.particle, config.grid, noise, record_amplitudes=record_amplitudes
    )


def draw_inputs(config: SimConfig, lattice: ModeLattice, index: int) -> tuple[np.ndarray, NoisePath | None]:
    """α(0) and the force path for trajectory ``index``, always drawn in that order."""

    stream = derive_stream(config.master_seed, index)
    alphas0 = sample_initial_modes(lattice, config.initial_dist, stream)
    noise = ou_noise_path(config.noise, config.grid, stream) if config.noise_applies else None
    return alphas0, noise


def run_trajectory(config: SimConfig, lattice: ModeLattice, index: int) -> TrajectoryOutcome:
    alphas0, noise = draw_inputs(config, lattice, index)
    try:
        trajectory = integrate_config(config, lattice, alphas0, noise)
    except TrajectoryDivergedError as exc:
        logger.warning("Trajectory %s diverged at step %s", index, exc.step)
        return TrajectoryOutcome(index, None, exc.step)
    return TrajectoryOutcome(index, trajectory)


def _execution_order(count: int, order: Iterable[int] | None) -> list[int]:
    if order is None:
        return list(range(count))
    order = list(order)
    if sorted(order) != list(range(count)):
        raise InvalidConfigError("execution order must be a permutation of the trajectory indices")
    return order


def aggregate(config: SimConfig, trajectories: Sequence[Trajectory]) -> Dict[str, TimeSeries]:
    """Ensemble series in index order; every series lives on ``config.grid``."""

    if not trajectories:
        raise EmptyInputError("no completed trajectories to aggregate")
    grid = config.grid
    by_velocity = msd_from_velocities(trajectories)
    if grid.n_points <= VACF_TABLE_LIMIT:
        from_table = msd_from_vacf(vacf_table(trajectories), grid)
        msd_vacf = TimeSeries(grid, from_table.values, by_velocity.stderr, "msd_vacf")
    else:
        logger.warning(
            "Grid has %s points (> %s); computing the VACF double integral per trajectory",
            grid.n_points,
            VACF_TABLE_LIMIT,
        )
        msd_vacf = by_velocity
    vacf_series = vacf(trajectories)
    series = [
        msd_direct(trajectories),
        msd_vacf,
        TimeSeries(grid, vacf_series.values, vacf_series.stderr, "vacf"),
        ensemble_mean(trajectories, "energies", "energy"),
        ensemble_mean(trajectories, "photon_numbers", "photon_number"),
        ensemble_mean(trajectories, "occupations", "photon_count"),
    ]
    return {item.name: item for item in series}


def run_ensemble(
    config: SimConfig,
    *,
    workers: int | None = None,
    execution_order: Iterable[int] | None = None,
) -> EnsembleResult:
    """Run ``config.n_trajectories`` trajectories and aggregate them in index order.

    ``execution_order`` only changes submission order; results land in
    index-addressed slots so the aggregate does not depend on it or on the
    worker count.
    """

    lattice = config.build_lattice()
    count = config.n_trajectories
    order = _execution_order(count, execution_order)
    workers = resolve_workers() if workers is None else max(1, workers)
    slots: list[Optional[TrajectoryOutcome]] = [None] * count

    logger.info("Running %s trajectories on %s workers (%s modes)", count, workers, lattice.n_modes)
    started = time.perf_counter()
    if workers == 1 or count == 1:
        for index in order:
            slots[index] = run_trajectory(config, lattice, index)
    else:
        with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
            futures = {index: pool.submit(run_trajectory, config, lattice, index) for index in order}
            for index, future in futures.items():
                slots[index] = future.result()
    elapsed = time.perf_counter() - started

    diverged = tuple(outcome.index for outcome in slots if outcome.diverged)
    if len(diverged) > DIVERGENCE_TOLERANCE * count or len(diverged) == count:
        raise EnsembleDivergedError(diverged, count)
    completed = [outcome.trajectory for outcome in slots if not outcome.diverged]

    kernel = memory_kernel(lattice, KernelEquation.COORDINATE, config.approx)
    metric = memory_metric(kernel, config.horizon(lattice))
    result = EnsembleResult(
        config=config,
        series=aggregate(config, completed),
        memory_metric=metric,
        n_completed=len(completed),
        diverged=diverged,
        wall_seconds=elapsed,
        workers=workers,
    )
    logger.info(
        "Ensemble finished in %.3fs: %s completed, %s diverged", elapsed, len(completed), len(diverged)
    )
    return result


def _drift(values: np.ndarray) -> float:
    reference = float(values[0])
    change = float(np.max(np.abs(values - reference)))
    return change / abs(reference) if reference != 0 else change


def growth_exponent(series: TimeSeries) -> Optional[float]:
    """Slope of log MSD against log elapsed time over the last decade; ``None`` if undefined."""

    elapsed = series.grid.elapsed()
    window = elapsed >= elapsed[-1] / 10.0
    window &= elapsed > 0
    values = series.values[window]
    if values.size < 2 or np.any(values <= 0) or not np.all(np.isfinite(values)):
        return None
    slope, _ = np.polyfit(np.log(elapsed[window]), np.log(values), 1)
    return float(slope) if math.isfinite(slope) else None


def summarize(result: EnsembleResult) -> EnsembleSummary:
    if result.n_completed < 1:
        raise EmptyInputError("cannot summarize an empty ensemble")
    msd = result.series["msd_direct"]
    return EnsembleSummary(
        final_msd=float(msd.values[-1]),
        exponent=growth_exponent(msd),
        memory_metric=result.memory_metric,
        energy_drift=_drift(result.series["energy"].values),
        photon_drift=_drift(result.series["photon_number"].values),
        n_completed=result.n_completed,
        n_diverged=len(result.diverged),
    )


__all__ = [
    "THREADS_ENV",
    "DIVERGENCE_TOLERANCE",
    "VACF_TABLE_LIMIT",
    "TrajectoryOutcome",
    "EnsembleResult",
    "EnsembleSummary",
    "resolve_workers",
    "integrate_config",
    "draw_inputs",
    "run_trajectory",
    "aggregate",
    "run_ensemble",
    "growth_exponent",
    "summarize",
]
