"""Ensemble diagnostics: VACF, mean-square displacement, photon numbers and memory kernels."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq, minimize_scalar

from .errors import EmptyInputError, GridError, InvalidConfigError
from .models import Approximation, ModeLattice, SystemState, _Choice
from .trajectory import TimeGrid, Trajectory

logger = logging.getLogger(__name__)

# Guards the metric normalization when the kernel vanishes identically.
METRIC_FLOOR = 1e-15
# Sampling density used to bracket sign changes of K(τ).
_POINTS_PER_PERIOD = 64
_MIN_SCAN_POINTS = 2049


@dataclass(slots=True, frozen=True, eq=False)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray
    stderr: Optional[np.ndarray] = None
    name: str = "value"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise GridError(f"series {self.name!r} has {values.shape} values for {self.grid.n_points} grid points")
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            stderr = np.asarray(self.stderr, dtype=float)
            if stderr.shape != values.shape:
                raise GridError(f"stderr of {self.name!r} does not match its values")
            object.__setattr__(self, "stderr", stderr)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    def renamed(self, name: str) -> "TimeSeries":
        return TimeSeries(self.grid, self.values, self.stderr, name)

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.times, self.name: self.values}
        if self.stderr is not None:
            columns[f"{self.name}_stderr"] = self.stderr
        return pd.DataFrame(columns)


class KernelEquation(_Choice):
    """Which reduced equation a kernel enters: dx (coordinate) or dp (momentum)."""

    COORDINATE = "coordinate"
    MOMENTUM = "momentum"


@dataclass(slots=True, frozen=True, eq=False)
class KernelSpec:
    """K(τ) = Σ w_k sin(ω_k τ) as parallel arrays of weights and frequencies."""

    weights: np.ndarray
    omegas: np.ndarray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        omegas = np.asarray(self.omegas, dtype=float).reshape(-1)
        if weights.shape != omegas.shape:
            raise InvalidConfigError("kernel weights and frequencies differ in length")
        if not np.all(np.isfinite(weights)):
            raise InvalidConfigError("kernel weights must be finite")
        if np.any(omegas <= 0):
            raise InvalidConfigError("kernel frequencies must be > 0")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "omegas", omegas)

    @classmethod
    def empty(cls) -> "KernelSpec":
        return cls(np.zeros(0), np.zeros(0))

    @property
    def is_empty(self) -> bool:
        return self.weights.size == 0

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        values = np.sin(np.multiply.outer(tau, self.omegas)) @ self.weights
        return float(values) if tau.ndim == 0 else values

    def antiderivative(self, tau):
        """Φ(τ) with Φ' = K: −Σ (w/ω) cos(ωτ)."""

        tau = np.asarray(tau, dtype=float)
        values = -np.cos(np.multiply.outer(tau, self.omegas)) @ (self.weights / self.omegas)
        return float(values) if tau.ndim == 0 else values

    def scaled(self, factor: float) -> "KernelSpec":
        return KernelSpec(self.weights * factor, self.omegas)


# -- ensemble plumbing --------------------------------------------------------


def _shared_grid(trajectories: Sequence[Trajectory]) -> TimeGrid:
    if not trajectories:
        raise EmptyInputError("ensemble reduction needs at least one trajectory")
    grid = trajectories[0].grid
    for trajectory in trajectories[1:]:
        if trajectory.grid != grid:
            raise GridError(f"trajectory grid {trajectory.grid} differs from {grid}")
    return grid


def _mean_and_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean over axis 0 and its standard error (ddof=1); zero error for a single sample."""

    count = samples.shape[0]
    mean = samples.mean(axis=0)
    if count < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / math.sqrt(count)


def _stacked(trajectories: Sequence[Trajectory], attribute: str) -> np.ndarray:
    return np.stack([getattr(trajectory, attribute) for trajectory in trajectories])


def _lag_stride(grid: TimeGrid, lags: TimeGrid) -> int:
    if lags.t0 != 0:
        raise GridError(f"lag grid must start at 0, got t0={lags.t0}")
    ratio = lags.dt / grid.dt
    stride = int(round(ratio))
    if stride < 1 or not math.isclose(ratio, stride, rel_tol=1e-9):
        raise GridError(f"lag step {lags.dt} is not a multiple of the trajectory step {grid.dt}")
    if lags.n_steps * stride > grid.n_steps:
        raise GridError(f"lag grid reaches {lags.t_final}, beyond the trajectory span {grid.duration}")
    return stride


def ensemble_mean(trajectories: Sequence[Trajectory], attribute: str, name: str | None = None) -> TimeSeries:
    """Ensemble mean of a scalar per-step record such as ``energies``."""

    grid = _shared_grid(trajectories)
    mean, stderr = _mean_and_stderr(_stacked(trajectories, attribute))
    return TimeSeries(grid, mean, stderr, name or attribute)


# -- velocity correlations and displacement -----------------------------------


def vacf(
    trajectories: Sequence[Trajectory],
    lags: TimeGrid | None = None,
    *,
    stationary: bool = False,
) -> TimeSeries:
    """Velocity autocorrelation C(τ) = ⟨v(t₁)·v(t₁+τ)⟩.

    The default takes t₁ at the first grid point. With ``stationary`` the
    product is also averaged over every admissible t₁ of each trajectory
    before the ensemble average.
    """

    grid = _shared_grid(trajectories)
    lags = lags or TimeGrid(0.0, grid.dt, grid.n_steps)
    stride = _lag_stride(grid, lags)
    velocities = _stacked(trajectories, "velocities")
    offsets = np.arange(lags.n_points) * stride

    if not stationary:
        samples = np.einsum("ac,akc->ak", velocities[:, 0, :], velocities[:, offsets, :])
    else:
        samples = np.empty((velocities.shape[0], offsets.size))
        for column, offset in enumerate(offsets):
            span = grid.n_points - offset
            products = np.einsum("atc,atc->at", velocities[:, :span, :], velocities[:, offset:, :])
            samples[:, column] = products.mean(axis=1)

    mean, stderr = _mean_and_stderr(samples)
    return TimeSeries(lags, mean, stderr, "vacf")


def vacf_table(trajectories: Sequence[Trajectory], *, per_component: bool = False) -> np.ndarray:
    """Two-time table C(t₁, t₂) on the trajectory grid; shape (n, n) or (3, n, n)."""

    _shared_grid(trajectories)
    velocities = _stacked(trajectories, "velocities")
    count = velocities.shape[0]
    if per_component:
        return np.einsum("atc,asc->cts", velocities, velocities) / count
    return np.einsum("atc,asc->ts", velocities, velocities) / count


def msd_from_vacf(vacf_2d: np.ndarray, grid: TimeGrid) -> TimeSeries:
    """⟨|x(t) − x(0)|²⟩ = ∫₀ᵗ∫₀ᵗ C(t₁, t₂) dt₁ dt₂ by nested cumulative trapezoids.

    A per-component table (leading axis of 3) is summed to the trace first.
    """

    table = np.asarray(vacf_2d, dtype=float)
    if table.ndim == 3:
        table = table.sum(axis=0)
    if table.shape != (grid.n_points, grid.n_points):
        raise GridError(f"correlation table {table.shape} does not match {grid.n_points} grid points")
    inner = cumulative_trapezoid(table, dx=grid.dt, axis=1, initial=0.0)
    outer = cumulative_trapezoid(inner, dx=grid.dt, axis=0, initial=0.0)
    return TimeSeries(grid, np.diagonal(outer).copy(), None, "msd_vacf")


def msd_from_velocities(trajectories: Sequence[Trajectory]) -> TimeSeries:
    """Per-trajectory |∫₀ᵗ v dt|² averaged over the ensemble, with stderr.

    Equal to ``msd_from_vacf(vacf_table(...))`` term by term, since the
    trapezoid rule on a product grid factorizes.
    """

    grid = _shared_grid(trajectories)
    velocities = _stacked(trajectories, "velocities")
    displacement = cumulative_trapezoid(velocities, dx=grid.dt, axis=1, initial=0.0)
    mean, stderr = _mean_and_stderr(np.sum(displacement**2, axis=2))
    return TimeSeries(grid, mean, stderr, "msd_vacf")


def msd_direct(trajectories: Sequence[Trajectory], *, per_component: bool = False):
    """⟨|x(t) − x(0)|²⟩ from recorded positions; three series when ``per_component``."""

    grid = _shared_grid(trajectories)
    positions = _stacked(trajectories, "positions")
    squared = (positions - positions[:, :1, :]) ** 2
    if per_component:
        series = []
        for axis, label in enumerate("xyz"):
            mean, stderr = _mean_and_stderr(squared[:, :, axis])
            series.append(TimeSeries(grid, mean, stderr, f"msd_{label}"))
        return tuple(series)
    mean, stderr = _mean_and_stderr(squared.sum(axis=2))
    return TimeSeries(grid, mean, stderr, "msd_direct")


def photon_number(state: SystemState, lattice: ModeLattice) -> float:
    """Energy-weighted occupation Σ ħω|α|²."""

    return float(lattice.units.hbar * np.sum(lattice.omegas * np.abs(state.alphas) ** 2))


def photon_count(state: SystemState) -> float:
    return float(np.sum(np.abs(state.alphas) ** 2))


# -- memory kernels -----------------------------------------------------------


def memory_kernel(
    lattice: ModeLattice,
    which: KernelEquation,
    approx: Approximation = Approximation.QUADRUPOLE,
) -> KernelSpec:
    """Per-mode (w, ω) pairs of the reduced equations' sine kernels.

    A mode contributes ∓(2/ħ)·v0²·|k|² (minus in the coordinate equation,
    plus in the momentum equation); the particle-dependent factors
    (ε·p)(k·x) along k̂ stay with the history integrand. Dipole dynamics has
    no history term, so its kernel is empty.
    """

    which = KernelEquation.from_value(which)
    if Approximation.from_value(approx) is Approximation.DIPOLE:
        return KernelSpec.empty()

    sign = -1.0 if which is KernelEquation.COORDINATE else 1.0
    weights, omegas = [], []
    for mode, v0 in zip(lattice.modes, lattice.couplings):
        weight = sign * 2.0 * v0**2 * float(np.dot(mode.k, mode.k)) / lattice.units.hbar
        if weight != 0.0:
            weights.append(weight)
            omegas.append(mode.omega)
    return KernelSpec(np.array(weights), np.array(omegas))


def _sign_breakpoints(kernel: KernelSpec, horizon: float) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    count = max(_MIN_SCAN_POINTS, int(math.ceil(_POINTS_PER_PERIOD * horizon * kernel.omegas.max() / (2.0 * math.pi))) + 1)
    taus = np.linspace(0.0, horizon, count)
    values = kernel(taus)
    roots = [0.0]
    for index in np.flatnonzero(values[:-1] * values[1:] < 0):
        roots.append(brentq(kernel, taus[index], taus[index + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    roots.append(horizon)
    return np.asarray(roots), (taus, values)


def memory_metric(kernel: KernelSpec, horizon: float, floor: float = METRIC_FLOOR) -> float:
    """Heuristic memory score M = ∫₀ᴴ|K| dτ / (H·max(max|K|, floor)), clipped to [0, 1].

    Zero exactly when the kernel is empty. The integral uses the analytic
    antiderivative between the sign changes of K.
    """

    if not horizon > 0:
        raise InvalidConfigError(f"memory metric horizon must be > 0, got {horizon!r}")
    if kernel.is_empty:
        return 0.0

    breakpoints, (taus, values) = _sign_breakpoints(kernel, horizon)
    primitive = kernel.antiderivative(breakpoints)
    integral = float(np.sum(np.abs(np.diff(primitive))))

    peak_index = int(np.argmax(np.abs(values)))
    peak = float(abs(values[peak_index]))
    low = taus[max(peak_index - 1, 0)]
    high = taus[min(peak_index + 1, taus.size - 1)]
    if high > low:
        refined = minimize_scalar(lambda tau: -abs(kernel(tau)), bounds=(low, high), method="bounded")
        peak = max(peak, -float(refined.fun))

    metric = integral / (horizon * max(peak, floor))
    return float(min(max(metric, 0.0), 1.0))


def kernel_series(kernel: KernelSpec, grid: TimeGrid, name: str = "kernel") -> TimeSeries:
    """K(τ) tabulated at the elapsed times of ``grid``."""

    values = kernel(grid.elapsed()) if not kernel.is_empty else np.zeros(grid.n_points)
    return TimeSeries(grid, values, None, name)


__all__ = [
    "METRIC_FLOOR",
    "TimeSeries",
    "KernelEquation",
    "KernelSpec",
    "ensemble_mean",
    "vacf",
    "vacf_table",
    "msd_from_vacf",
    "msd_from_velocities",
    "msd_direct",
    "photon_number",
    "photon_count",
    "memory_kernel",
    "memory_metric",
    "kernel_series",
]
