"""Physical units, the truncated field-mode lattice, couplings and Hamiltonians."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateDirectionError,
    InvalidConfigError,
    InvalidFrequencyError,
    StateShapeError,
)

logger = logging.getLogger(__name__)

Vector3 = tuple[float, float, float]

# Tolerance for the realness check on the quadrupole interaction sum.
REALNESS_TOLERANCE = 1e-12


class _Choice(str, Enum):
    """String-valued option parsed case-insensitively from config text."""

    @classmethod
    def from_value(cls, value: Optional[str]):
        if isinstance(value, cls):
            return value
        normalized = (value or "").strip().lower()
        for member in cls:
            if member.value == normalized:
                return member
        choices = ", ".join(member.value for member in cls)
        raise InvalidConfigError(f"unsupported {cls.__name__} {value!r} (expected one of: {choices})")


class Approximation(_Choice):
    """Expansion order of e^{ik·x} in the coupling."""

    DIPOLE = "dipole"
    QUADRUPOLE = "quadrupole"


class Formulation(_Choice):
    """Local (particle + modes) or reduced (particle-only, with memory) equations."""

    LOCAL = "local"
    REDUCED = "reduced"


class ConvolutionMethod(_Choice):
    NAIVE = "naive"
    INCREMENTAL = "incremental"


@dataclass(slots=True, frozen=True)
class UnitsConfig:
    """Action and speed scales; both default to one."""

    hbar: float = 1.0
    c: float = 1.0

    def __post_init__(self) -> None:
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise InvalidConfigError(f"hbar must be > 0, got {self.hbar!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise InvalidConfigError(f"c must be > 0, got {self.c!r}")


@dataclass(slots=True, frozen=True)
class ParticleParams:
    """Mass, charge and the global multiplier ``coupling_scale`` (g) of the nonlocal terms."""

    mass: float = 1.0
    charge: float = 1.0
    coupling_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise InvalidConfigError(f"mass must be > 0, got {self.mass!r}")
        if not math.isfinite(self.charge):
            raise InvalidConfigError(f"charge must be finite, got {self.charge!r}")
        if not (self.coupling_scale >= 0 and math.isfinite(self.coupling_scale)):
            raise InvalidConfigError(
                f"coupling_scale must be >= 0, got {self.coupling_scale!r}"
            )

    @property
    def charge_to_mass(self) -> float:
        return self.charge / self.mass


@dataclass(slots=True, frozen=True)
class Mode:
    """One (k, r) field mode; ``eps`` is the active polarization ε_r."""

    n: tuple[int, int, int]
    polarization: int
    k: Vector3
    omega: float
    eps1: Vector3
    eps2: Vector3
    v0: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise InvalidFrequencyError(f"mode frequency must be > 0, got {self.omega!r}")
        if self.polarization not in (1, 2):
            raise InvalidConfigError(f"polarization index must be 1 or 2, got {self.polarization!r}")

    @property
    def eps(self) -> Vector3:
        return self.eps1 if self.polarization == 1 else self.eps2

    @property
    def sort_key(self) -> tuple[tuple[int, int, int], int]:
        return (self.n, self.polarization)


@dataclass(slots=True, frozen=True)
class ModeLattice:
    """Truncated set of modes in a periodic box of side ``box_length``.

    The stacked arrays (``k_vectors``, ``omegas``, ``polarizations``,
    ``couplings``) are read-only views used by the vectorized dynamics.
    """

    box_length: float
    n_max: int
    modes: tuple[Mode, ...]
    units: UnitsConfig = field(default_factory=UnitsConfig)
    k_vectors: np.ndarray = field(init=False, repr=False, compare=False)
    omegas: np.ndarray = field(init=False, repr=False, compare=False)
    polarizations: np.ndarray = field(init=False, repr=False, compare=False)
    couplings: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise InvalidConfigError(f"box_length must be > 0, got {self.box_length!r}")
        if not self.modes:
            raise InvalidConfigError("a mode lattice needs at least one mode")

        seen: set[tuple[tuple[int, int, int], int]] = set()
        for mode in self.modes:
            if mode.sort_key in seen:
                raise InvalidConfigError(f"duplicate mode n={mode.n} r={mode.polarization}")
            if not any(mode.n):
                raise InvalidConfigError("the k = 0 mode is excluded from the lattice")
            seen.add(mode.sort_key)

        arrays = {
            "k_vectors": np.array([mode.k for mode in self.modes], dtype=float),
            "omegas": np.array([mode.omega for mode in self.modes], dtype=float),
            "polarizations": np.array([mode.eps for mode in self.modes], dtype=float),
            "couplings": np.array([mode.v0 for mode in self.modes], dtype=float),
        }
        for name, array in arrays.items():
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def quantization_volume(self) -> float:
        return self.box_length**3

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def omega_min(self) -> float:
        return float(self.omegas.min())

    @property
    def omega_max(self) -> float:
        return float(self.omegas.max())

    def truncated(self, count: int) -> "ModeLattice":
        """Keep the first ``count`` modes; diagnostic runs only (breaks ±k pairing)."""

        if count < 1:
            raise InvalidConfigError(f"mode count must be >= 1, got {count}")
        return ModeLattice(self.box_length, self.n_max, self.modes[:count], self.units)


@dataclass(slots=True, frozen=True, eq=False)
class SystemState:
    """Particle position and momentum plus complex mode amplitudes at time ``t``."""

    t: float
    x: np.ndarray
    p: np.ndarray
    alphas: np.ndarray

    def __post_init__(self) -> None:
        x = as_vector3(self.x, "x")
        p = as_vector3(self.p, "p")
        alphas = np.array(self.alphas, dtype=complex).reshape(-1)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p)) and np.all(np.isfinite(alphas))):
            raise StateShapeError("system state contains non-finite components")
        for name, array in (("x", x), ("p", p), ("alphas", alphas)):
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def initial(
        cls,
        lattice: ModeLattice,
        x0: Sequence[float] = (0.0, 0.0, 0.0),
        p0: Sequence[float] = (0.0, 0.0, 0.0),
        alphas: Iterable[complex] | None = None,
        *,
        t: float = 0.0,
    ) -> "SystemState":
        values = np.zeros(lattice.n_modes, dtype=complex) if alphas is None else np.asarray(list(alphas), dtype=complex)
        state = cls(t=t, x=np.asarray(x0, dtype=float), p=np.asarray(p0, dtype=float), alphas=values)
        require_consistent(state, lattice)
        return state


def as_vector3(value: Sequence[float] | np.ndarray, name: str = "vector") -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.shape != (3,):
        raise StateShapeError(f"{name} must be a 3-vector, got shape {array.shape}")
    return array


def require_consistent(state: SystemState, lattice: ModeLattice) -> None:
    if state.alphas.shape != (lattice.n_modes,):
        raise StateShapeError(
            f"state carries {state.alphas.size} amplitudes but the lattice has {lattice.n_modes} modes"
        )


def polarization_basis(k: Sequence[float] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return the transverse orthonormal pair (ε₁, ε₂) for wave vector ``k``.

    ε₁ = normalize(a × k) with ``a`` the coordinate axis least aligned with
    ``k`` (ties go to the higher axis index); ε₂ = normalize(k × ε₁).
    """

    vector = as_vector3(k, "k")
    norm = float(np.linalg.norm(vector))
    if not (norm > 0 and math.isfinite(norm)):
        raise DegenerateDirectionError(f"polarization basis undefined for k = {tuple(vector)}")

    magnitudes = np.abs(vector)
    least = magnitudes.min()
    axis = max(index for index in range(3) if magnitudes[index] == least)
    reference = np.zeros(3)
    reference[axis] = 1.0

    eps1 = np.cross(reference, vector)
    eps1 /= np.linalg.norm(eps1)
    eps2 = np.cross(vector, eps1)
    eps2 /= np.linalg.norm(eps2)
    return eps1, eps2


def _coupling_amplitude(omega: float, volume: float, params: ParticleParams, units: UnitsConfig) -> float:
    if not omega > 0:
        raise InvalidFrequencyError(f"mode frequency must be > 0, got {omega!r}")
    if not volume > 0:
        raise InvalidConfigError(f"quantization volume must be > 0, got {volume!r}")
    scale = math.sqrt(units.hbar * units.c**2 / (2.0 * volume * omega))
    return params.coupling_scale * (-params.charge_to_mass) * scale


def coupling_v0(mode: Mode, params: ParticleParams, lattice: ModeLattice, units: UnitsConfig) -> float:
    """V₀ = g·(−e/m)·(ħc²/(2Vω))^½ for ``mode`` in ``lattice``."""

    return _coupling_amplitude(mode.omega, lattice.quantization_volume, params, units)


def build_lattice(
    box_length: float,
    n_max: int,
    units: UnitsConfig | None = None,
    params: ParticleParams | None = None,
) -> ModeLattice:
    """Enumerate every (k, r) mode with k = 2πn/L and 0 < |n| ≤ n_max.

    Modes are ordered lexicographically in ``n`` and then by polarization
    index; ``v0`` is evaluated here so the lattice is self-contained.
    """

    units = units or UnitsConfig()
    params = params or ParticleParams()
    if not (isinstance(box_length, (int, float)) and box_length > 0 and math.isfinite(box_length)):
        raise InvalidConfigError(f"box_length must be > 0, got {box_length!r}")
    if isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 1:
        raise InvalidConfigError(f"n_max must be an integer >= 1, got {n_max!r}")

    volume = float(box_length) ** 3
    modes: list[Mode] = []
    span = range(-n_max, n_max + 1)
    for n in itertools.product(span, repeat=3):
        squared = n[0] ** 2 + n[1] ** 2 + n[2] ** 2
        if squared == 0 or squared > n_max**2:
            continue
        k = np.array(n, dtype=float) * (2.0 * math.pi / box_length)
        omega = units.c * float(np.linalg.norm(k))
        eps1, eps2 = polarization_basis(k)
        v0 = _coupling_amplitude(omega, volume, params, units)
        for r in (1, 2):
            modes.append(
                Mode(
                    n=tuple(int(value) for value in n),
                    polarization=r,
                    k=_as_tuple(k),
                    omega=omega,
                    eps1=_as_tuple(eps1),
                    eps2=_as_tuple(eps2),
                    v0=v0,
                )
            )

    lattice = ModeLattice(float(box_length), n_max, tuple(modes), units)
    logger.debug(
        "Built lattice L=%s n_max=%s: %s modes, omega in [%s, %s]",
        box_length,
        n_max,
        lattice.n_modes,
        lattice.omega_min,
        lattice.omega_max,
    )
    return lattice


def transverse_momenta(p: np.ndarray, lattice: ModeLattice) -> np.ndarray:
    """ε_r·p for every mode."""

    return lattice.polarizations @ p


def dipole_couplings(p: np.ndarray, lattice: ModeLattice) -> np.ndarray:
    """V_{k,r}(p) = v0·(ε_r·p), real."""

    return lattice.couplings * transverse_momenta(p, lattice)


def quadrupole_couplings(p: np.ndarray, x: np.ndarray, lattice: ModeLattice) -> np.ndarray:
    """V_{k,r}(p, x) = i·v0·(ε_r·p)(k·x), pure imaginary."""

    return 1j * (lattice.couplings * transverse_momenta(p, lattice) * (lattice.k_vectors @ x))


def interaction_energy(state: SystemState, lattice: ModeLattice, approx: Approximation) -> float:
    require_consistent(state, lattice)
    alphas = state.alphas
    if Approximation.from_value(approx) is Approximation.DIPOLE:
        return float(np.sum(dipole_couplings(state.p, lattice) * (alphas + np.conj(alphas))).real)

    total = np.sum(quadrupole_couplings(state.p, state.x, lattice) * (alphas - np.conj(alphas)))
    if abs(total.imag) > REALNESS_TOLERANCE * max(1.0, abs(total.real)):
        raise StateShapeError(f"quadrupole interaction energy is not real: {total!r}")
    return float(total.real)


def field_energy(state: SystemState, lattice: ModeLattice) -> float:
    return float(lattice.units.hbar * np.sum(lattice.omegas * np.abs(state.alphas) ** 2))


def hamiltonian(
    state: SystemState,
    lattice: ModeLattice,
    params: ParticleParams,
    approx: Approximation,
) -> float:
    """Energy p²/2m + Σħω|α|² + interaction; the stochastic F term is excluded."""

    require_consistent(state, lattice)
    kinetic = float(state.p @ state.p) / (2.0 * params.mass)
    return kinetic + field_energy(state, lattice) + interaction_energy(state, lattice, approx)


def _as_tuple(vector: np.ndarray) -> Vector3:
    return (float(vector[0]), float(vector[1]), float(vector[2]))


__all__ = [
    "Approximation",
    "Formulation",
    "ConvolutionMethod",
    "UnitsConfig",
    "ParticleParams",
    "Mode",
    "ModeLattice",
    "SystemState",
    "Vector3",
    "as_vector3",
    "require_consistent",
    "polarization_basis",
    "coupling_v0",
    "build_lattice",
    "transverse_momenta",
    "dipole_couplings",
    "quadrupole_couplings",
    "interaction_energy",
    "field_energy",
    "hamiltonian",
]
