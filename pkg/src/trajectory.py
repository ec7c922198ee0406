"""Time grids, recorded trajectories and the fixed-step RK4 drivers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np

from .errors import GridError, InvalidConfigError, StateShapeError, TrajectoryDivergedError
from .models import (
    Approximation,
    ModeLattice,
    ParticleParams,
    SystemState,
    hamiltonian,
    require_consistent,
)

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .stochastic import NoisePath

logger = logging.getLogger(__name__)

# Largest dt·ω_max accepted without a warning.
STEP_SIZE_LIMIT = 0.1

Arrays = tuple[np.ndarray, ...]
RateFunction = Callable[[float, Arrays, np.ndarray], Arrays]


@dataclass(slots=True, frozen=True)
class TimeGrid:
    t0: float = 0.0
    dt: float = 0.01
    n_steps: int = 1000

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidConfigError(f"dt must be > 0, got {self.dt!r}")
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise InvalidConfigError(f"n_steps must be an integer >= 1, got {self.n_steps!r}")
        if not math.isfinite(self.t0):
            raise InvalidConfigError(f"t0 must be finite, got {self.t0!r}")

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def t_final(self) -> float:
        return self.time(self.n_steps)

    def time(self, index: int) -> float:
        return self.t0 + index * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_points) * self.dt

    def elapsed(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt


@dataclass(slots=True, frozen=True, eq=False)
class StateDerivative:
    """Right-hand side (dx, dp, dα) evaluated at one state."""

    dx: np.ndarray
    dp: np.ndarray
    dalphas: np.ndarray

    def matches(self, state: SystemState) -> bool:
        return (
            self.dx.shape == state.x.shape
            and self.dp.shape == state.p.shape
            and self.dalphas.shape == state.alphas.shape
        )


@dataclass(slots=True, frozen=True, eq=False)
class Trajectory:
    """Grid-sampled record of one integration.

    ``velocities`` hold the recorded dx (the right-hand side, not a finite
    difference). ``amplitudes`` is ``None`` when the integrator was asked not
    to keep the mode record.
    """

    grid: TimeGrid
    positions: np.ndarray
    momenta: np.ndarray
    velocities: np.ndarray
    energies: np.ndarray
    photon_numbers: np.ndarray
    occupations: np.ndarray
    amplitudes: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        expected = self.grid.n_points
        for name in ("positions", "momenta", "velocities"):
            array = getattr(self, name)
            if array.shape != (expected, 3):
                raise StateShapeError(f"{name} must have shape ({expected}, 3), got {array.shape}")
        for name in ("energies", "photon_numbers", "occupations"):
            array = getattr(self, name)
            if array.shape != (expected,):
                raise StateShapeError(f"{name} must have shape ({expected},), got {array.shape}")
        if self.amplitudes is not None and self.amplitudes.shape[0] != expected:
            raise StateShapeError("amplitude record length does not match the grid")

    @classmethod
    def from_kinematics(
        cls,
        grid: TimeGrid,
        positions: Sequence[Sequence[float]] | np.ndarray,
        velocities: Sequence[Sequence[float]] | np.ndarray,
        momenta: Sequence[Sequence[float]] | np.ndarray | None = None,
    ) -> "Trajectory":
        """Build a particle-only trajectory (energies and photon numbers zero)."""

        positions = np.asarray(positions, dtype=float)
        velocities = np.asarray(velocities, dtype=float)
        momenta = velocities.copy() if momenta is None else np.asarray(momenta, dtype=float)
        zeros = np.zeros(grid.n_points)
        return cls(grid, positions, momenta, velocities, zeros, zeros.copy(), zeros.copy())

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    @property
    def states(self) -> list[SystemState]:
        if self.amplitudes is None:
            raise StateShapeError("mode amplitudes were not recorded for this trajectory")
        times = self.times
        return [
            SystemState(times[i], self.positions[i], self.momenta[i], self.amplitudes[i])
            for i in range(self.grid.n_points)
        ]

    def state(self, index: int) -> SystemState:
        if self.amplitudes is None:
            raise StateShapeError("mode amplitudes were not recorded for this trajectory")
        return SystemState(self.grid.time(index), self.positions[index], self.momenta[index], self.amplitudes[index])


class TrajectoryRecorder:
    """Preallocated buffers filled one grid point at a time."""

    def __init__(
        self,
        grid: TimeGrid,
        lattice: ModeLattice,
        params: ParticleParams,
        approx: Approximation,
        *,
        record_amplitudes: bool = True,
    ) -> None:
        self.grid = grid
        self.lattice = lattice
        self.params = params
        self.approx = approx
        size = grid.n_points
        self.positions = np.empty((size, 3))
        self.momenta = np.empty((size, 3))
        self.velocities = np.empty((size, 3))
        self.energies = np.empty(size)
        self.photon_numbers = np.empty(size)
        self.occupations = np.empty(size)
        self.amplitudes = np.empty((size, lattice.n_modes), dtype=complex) if record_amplitudes else None

    def record(self, index: int, x: np.ndarray, p: np.ndarray, alphas: np.ndarray, velocity: np.ndarray) -> None:
        state = SystemState(self.grid.time(index), x, p, alphas)
        self.positions[index] = x
        self.momenta[index] = p
        self.velocities[index] = velocity
        self.energies[index] = hamiltonian(state, self.lattice, self.params, self.approx)
        weights = np.abs(alphas) ** 2
        self.photon_numbers[index] = self.lattice.units.hbar * float(self.lattice.omegas @ weights)
        self.occupations[index] = float(weights.sum())
        if self.amplitudes is not None:
            self.amplitudes[index] = alphas

    def finish(self) -> Trajectory:
        return Trajectory(
            grid=self.grid,
            positions=self.positions,
            momenta=self.momenta,
            velocities=self.velocities,
            energies=self.energies,
            photon_numbers=self.photon_numbers,
            occupations=self.occupations,
            amplitudes=self.amplitudes,
        )


def check_step_size(grid: TimeGrid, lattice: ModeLattice) -> bool:
    """Warn when dt·ω_max exceeds ``STEP_SIZE_LIMIT``; return whether the grid is fine."""

    product = grid.dt * lattice.omega_max
    if product > STEP_SIZE_LIMIT:
        logger.warning(
            "Step size dt=%s gives dt*omega_max=%.3g > %s; expect integration error",
            grid.dt,
            product,
            STEP_SIZE_LIMIT,
        )
        return False
    return True


def force_schedule(noise: "NoisePath | None", grid: TimeGrid) -> Optional[np.ndarray]:
    """External force per grid point (held constant over each step), or ``None``."""

    if noise is None:
        return None
    if noise.grid != grid:
        raise GridError(f"noise path grid {noise.grid} does not match integration grid {grid}")
    return np.asarray(noise.values, dtype=float)


def rk4_step(rate: RateFunction, t: float, y: Arrays, dt: float, force: np.ndarray) -> Arrays:
    half = 0.5 * dt
    k1 = rate(t, y, force)
    k2 = rate(t + half, tuple(v + half * d for v, d in zip(y, k1)), force)
    k3 = rate(t + half, tuple(v + half * d for v, d in zip(y, k2)), force)
    k4 = rate(t + dt, tuple(v + dt * d for v, d in zip(y, k3)), force)
    sixth = dt / 6.0
    return tuple(v + sixth * (a + 2.0 * b + 2.0 * c + d) for v, a, b, c, d in zip(y, k1, k2, k3, k4))


def _turned(y: Arrays, phase: np.ndarray) -> Arrays:
    return y[0], y[1], phase * y[2]


def _shifted(y: Arrays, scale: float, rates: Arrays) -> Arrays:
    return tuple(v + scale * d for v, d in zip(y, rates))


def rotating_rk4_step(
    rate: RateFunction, t: float, y: Arrays, dt: float, force: np.ndarray, omegas: np.ndarray
) -> Arrays:
    """RK4 on (x, p, α) in the frame co-rotating with the free modes.

    ``rate`` is the full right-hand side. Its free term −iωα is taken out and
    applied exactly as e^{−iωdt}, so an amplitude with zero drive keeps its
    modulus to rounding.
    """

    omegas = np.asarray(omegas, dtype=float)

    def drive(s: float, state: Arrays) -> Arrays:
        dx, dp, dalphas = rate(s, state, force)
        return dx, dp, dalphas + 1j * omegas * state[2]

    half = 0.5 * dt
    half_turn = np.exp(-1j * omegas * half)
    full_turn = np.exp(-1j * omegas * dt)
    k1 = drive(t, y)
    k2 = drive(t + half, _turned(_shifted(y, half, k1), half_turn))
    k3 = drive(t + half, _shifted(_turned(y, half_turn), half, k2))
    k4 = drive(t + dt, _shifted(_turned(y, full_turn), dt, _turned(k3, half_turn)))
    sixth = dt / 6.0
    middle = _turned(tuple(b + c for b, c in zip(k2, k3)), half_turn)
    return tuple(
        v + sixth * (a + 2.0 * b + d)
        for v, a, b, d in zip(_turned(y, full_turn), _turned(k1, full_turn), middle, k4)
    )


def all_finite(y: Arrays) -> bool:
    return all(bool(np.all(np.isfinite(component))) for component in y)


def integrate_local(
    rate: RateFunction,
    approx: Approximation,
    state0: SystemState,
    lattice: ModeLattice,
    params: ParticleParams,
    grid: TimeGrid,
    noise: "NoisePath | None" = None,
    *,
    record_amplitudes: bool = True,
) -> Trajectory:
    """Integrate (x, p, α) with ``rate(t, (x, p, α), force) -> (dx, dp, dα)``.

    Steps with ``rotating_rk4_step``: the free mode rotation is exact and the
    coupling terms are fourth order.
    """

    require_consistent(state0, lattice)
    check_step_size(grid, lattice)
    forces = force_schedule(noise, grid)
    zero_force = np.zeros(3)

    recorder = TrajectoryRecorder(grid, lattice, params, approx, record_amplitudes=record_amplitudes)
    y: Arrays = (state0.x.copy(), state0.p.copy(), state0.alphas.copy())

    for index in range(grid.n_points):
        t = grid.time(index)
        force = zero_force if forces is None else forces[index]
        velocity = rate(t, y, force)[0]
        recorder.record(index, y[0], y[1], y[2], velocity)
        if index == grid.n_steps:
            break
        y = rotating_rk4_step(rate, t, y, grid.dt, force, lattice.omegas)
        if not all_finite(y):
            logger.warning("Integration diverged at step %s (t=%s)", index + 1, grid.time(index + 1))
            raise TrajectoryDivergedError(index + 1)

    return recorder.finish()


__all__ = [
    "STEP_SIZE_LIMIT",
    "TimeGrid",
    "StateDerivative",
    "Trajectory",
    "TrajectoryRecorder",
    "check_step_size",
    "force_schedule",
    "rk4_step",
    "rotating_rk4_step",
    "all_finite",
    "integrate_local",
]
