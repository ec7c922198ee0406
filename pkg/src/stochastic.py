"""Reproducible randomness: per-trajectory streams, initial amplitudes and colored force paths."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import lfilter

from .errors import GridError, InvalidConfigError
from .models import ModeLattice, _Choice
from .trajectory import TimeGrid

logger = logging.getLogger(__name__)

_SEED_MODULUS = 2**64


@dataclass(slots=True, frozen=True)
class NoiseConfig:
    """Stationary Ornstein–Uhlenbeck force: ⟨F_i(t)F_j(t′)⟩ = δ_ij σ² e^{−|t−t′|/τ_c}.

    ``in_quadrupole`` lets the force act on quadrupole runs as well; by
    default it only drives dipole runs.
    """

    sigma: float = 0.0
    tau_c: float = 1.0
    enabled: bool = False
    in_quadrupole: bool = False

    def __post_init__(self) -> None:
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise InvalidConfigError(f"noise sigma must be >= 0, got {self.sigma!r}")
        if not (self.tau_c > 0 and math.isfinite(self.tau_c)):
            raise InvalidConfigError(f"noise tau_c must be > 0, got {self.tau_c!r}")

    @property
    def active(self) -> bool:
        return self.enabled and self.sigma > 0


@dataclass(slots=True, frozen=True, eq=False)
class NoisePath:
    """One force realization sampled on ``grid``; ``values`` has shape (n_points, 3)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_points, 3):
            raise GridError(
                f"noise path must have shape ({self.grid.n_points}, 3), got {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "NoisePath":
        return cls(grid, np.zeros((grid.n_points, 3)))


class InitialModeKind(_Choice):
    THERMAL = "thermal"
    FIXED = "fixed"
    VACUUM = "vacuum"


@dataclass(slots=True, frozen=True)
class InitialModeDist:
    """Distribution of α(0); phases are always uniform on [0, 2π)."""

    kind: InitialModeKind = InitialModeKind.THERMAL
    temperature: float = 1.0
    occupation: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", InitialModeKind.from_value(self.kind))
        if not (self.temperature >= 0 and math.isfinite(self.temperature)):
            raise InvalidConfigError(f"temperature must be >= 0, got {self.temperature!r}")
        if not (self.occupation >= 0 and math.isfinite(self.occupation)):
            raise InvalidConfigError(f"occupation must be >= 0, got {self.occupation!r}")


def derive_stream(master_seed: int, trajectory_index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory: Philox keyed by (seed, index)."""

    if trajectory_index < 0:
        raise InvalidConfigError(f"trajectory index must be >= 0, got {trajectory_index}")
    sequence = np.random.SeedSequence(entropy=int(master_seed) % _SEED_MODULUS, spawn_key=(int(trajectory_index),))
    return np.random.Generator(np.random.Philox(sequence))


def bose_occupation(energy, temperature: float):
    """n̄ = 1/(e^{ħω/T} − 1); zero at T = 0."""

    if temperature < 0:
        raise InvalidConfigError(f"temperature must be >= 0, got {temperature!r}")
    energy = np.asarray(energy, dtype=float)
    if temperature == 0:
        return np.zeros_like(energy) if energy.ndim else 0.0
    result = 1.0 / np.expm1(energy / temperature)
    return result if energy.ndim else float(result)


def sample_initial_modes(
    lattice: ModeLattice, dist: InitialModeDist, stream: np.random.Generator
) -> np.ndarray:
    size = lattice.n_modes
    if dist.kind is InitialModeKind.VACUUM:
        return np.zeros(size, dtype=complex)

    if dist.kind is InitialModeKind.FIXED:
        phases = stream.uniform(0.0, 2.0 * math.pi, size)
        return math.sqrt(dist.occupation) * np.exp(1j * phases)

    occupations = bose_occupation(lattice.units.hbar * lattice.omegas, dist.temperature)
    if dist.temperature == 0:
        return np.zeros(size, dtype=complex)
    draws = stream.standard_normal((2, size))
    return np.sqrt(occupations / 2.0) * (draws[0] + 1j * draws[1])


def ou_noise_path(config: NoiseConfig, grid: TimeGrid, stream: np.random.Generator) -> NoisePath:
    """Exact OU discretization F_{n+1} = ρF_n + σ√(1−ρ²)ξ, ρ = e^{−dt/τ_c}, started stationary."""

    if not config.active:
        return NoisePath.zeros(grid)

    rho = math.exp(-grid.dt / config.tau_c)
    scale = config.sigma * math.sqrt(-math.expm1(-2.0 * grid.dt / config.tau_c))
    start = config.sigma * stream.standard_normal(3)
    shocks = stream.standard_normal((grid.n_steps, 3))
    path, _ = lfilter([scale], [1.0, -rho], shocks, axis=0, zi=(rho * start)[None, :])
    return NoisePath(grid, np.vstack([start, path]))


__all__ = [
    "NoiseConfig",
    "NoisePath",
    "InitialModeKind",
    "InitialModeDist",
    "derive_stream",
    "bose_occupation",
    "sample_initial_modes",
    "ou_noise_path",
]
